#pragma once

// Checkpoint file: "AIDECKPT", u16 version, u32 header length, JSON header
// (config, run state, tensor directory), then little-endian float64 payloads
// in directory order. Directory offsets are relative to the payload start.

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "aide/model/aide_model.hpp"

namespace aide {

inline constexpr char checkpoint_magic[] = "AIDECKPT";
inline constexpr std::size_t checkpoint_magic_len = 8;
inline constexpr std::uint16_t checkpoint_version = 1;

struct Checkpoint {
    std::uint16_t version = checkpoint_version;
    AideConfig config;
    std::size_t epochs_completed = 0;
    std::vector<double> epoch_losses;
    std::vector<nn::ParamState> params;

    bool operator==(const Checkpoint& o) const {
        if (version != o.version || to_json(config) != to_json(o.config) || epochs_completed != o.epochs_completed ||
            epoch_losses != o.epoch_losses || params.size() != o.params.size()) {
            return false;
        }
        for (std::size_t i = 0; i < params.size(); ++i) {
            const auto& a = params[i];
            const auto& b = o.params[i];
            if (a.name != b.name || a.value != b.value || a.adam_m != b.adam_m || a.adam_v != b.adam_v ||
                a.step_count != b.step_count) {
                return false;
            }
        }
        return true;
    }
};

inline Checkpoint snapshot(const AideModel& model, std::size_t epochs_completed, std::vector<double> epoch_losses) {
    Checkpoint ckpt;
    ckpt.config = model.config();
    ckpt.epochs_completed = epochs_completed;
    ckpt.epoch_losses = std::move(epoch_losses);
    for (const auto& p : model.params().all()) {
        nn::ParamState copy = p;
        copy.grad = nn::Tensor();
        ckpt.params.push_back(std::move(copy));
    }
    return ckpt;
}

/// Rebuilds the model from the checkpoint config and copies every tensor in.
inline AideModel restore_model(const Checkpoint& ckpt) {
    AideModel model(ckpt.config);
    auto& store = model.params();
    if (store.size() != ckpt.params.size()) {
        throw CorruptCheckpointError("parameter count " + std::to_string(ckpt.params.size()) +
                                     " does not match architecture (" + std::to_string(store.size()) + ")");
    }
    for (std::size_t i = 0; i < store.size(); ++i) {
        const auto& src = ckpt.params[i];
        auto& dst = store[i];
        if (src.name != dst.name || src.value.shape != dst.value.shape) {
            throw CorruptCheckpointError("tensor " + src.name + " does not match architecture entry " + dst.name);
        }
        dst.value = src.value;
        dst.adam_m = src.adam_m.numel() ? src.adam_m : nn::zeros_like(src.value);
        dst.adam_v = src.adam_v.numel() ? src.adam_v : nn::zeros_like(src.value);
        dst.step_count = src.step_count;
        dst.grad = nn::zeros_like(src.value);
    }
    return model;
}

inline std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
    nlohmann::ordered_json header;
    header["config"] = to_json(ckpt.config);
    header["seed"] = ckpt.config.seed;
    header["epochs_completed"] = ckpt.epochs_completed;
    header["epoch_losses"] = ckpt.epoch_losses;
    auto& dir = header["tensors"] = nlohmann::ordered_json::array();
    auto& steps = header["step_counts"] = nlohmann::ordered_json::object();
    std::vector<const nn::Tensor*> payload;
    std::size_t offset = 0;
    for (const auto& p : ckpt.params) {
        steps[p.name] = p.step_count;
        for (const auto& [suffix, t] : {std::pair<const char*, const nn::Tensor*>{"", &p.value},
                                        {"#adam_m", &p.adam_m},
                                        {"#adam_v", &p.adam_v}}) {
            dir.push_back({{"name", p.name + suffix}, {"shape", t->shape}, {"offset", offset}});
            offset += t->numel() * 8;
            payload.push_back(t);
        }
    }
    const std::string text = header.dump();

    std::vector<std::uint8_t> out(checkpoint_magic, checkpoint_magic + checkpoint_magic_len);
    detail::put_le<std::uint16_t>(out, ckpt.version);
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
    out.insert(out.end(), text.begin(), text.end());
    out.reserve(out.size() + offset);
    for (const auto* t : payload)
        for (double v : t->data) detail::put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
    return out;
}

inline Checkpoint parse_checkpoint(const std::vector<std::uint8_t>& bytes) {
    const std::size_t fixed = checkpoint_magic_len + 2 + 4;
    if (bytes.size() < fixed || std::memcmp(bytes.data(), checkpoint_magic, checkpoint_magic_len) != 0) {
        throw CorruptCheckpointError("bad magic");
    }
    Checkpoint ckpt;
    ckpt.version = detail::get_le<std::uint16_t>(&bytes[checkpoint_magic_len]);
    if (ckpt.version != checkpoint_version) {
        throw CorruptCheckpointError("unsupported version " + std::to_string(ckpt.version));
    }
    const auto header_len = detail::get_le<std::uint32_t>(&bytes[checkpoint_magic_len + 2]);
    if (fixed + header_len > bytes.size()) throw CorruptCheckpointError("truncated header");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(fixed),
                                       bytes.begin() + static_cast<std::ptrdiff_t>(fixed + header_len));
        ckpt.config = config_from_json(header.at("config"));
        ckpt.epochs_completed = header.at("epochs_completed").get<std::size_t>();
        ckpt.epoch_losses = header.at("epoch_losses").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw CorruptCheckpointError(std::string("header: ") + e.what());
    } catch (const ConfigError& e) {
        throw CorruptCheckpointError(e.what());
    }

    const std::size_t payload_start = fixed + header_len;
    const std::size_t payload_size = bytes.size() - payload_start;
    std::size_t expected = 0;
    auto read_tensor = [&](const nlohmann::json& entry, const std::string& want) {
        const auto name = entry.at("name").get<std::string>();
        if (name != want) throw CorruptCheckpointError("directory entry " + name + " out of order");
        nn::Tensor t(entry.at("shape").get<nn::Shape>());
        const auto off = entry.at("offset").get<std::size_t>();
        if (off != expected || off + t.numel() * 8 > payload_size) {
            throw CorruptCheckpointError("tensor " + name + " byte range exceeds payload");
        }
        for (std::size_t i = 0; i < t.numel(); ++i) {
            t.data[i] = std::bit_cast<double>(detail::get_le<std::uint64_t>(&bytes[payload_start + off + 8 * i]));
        }
        expected = off + t.numel() * 8;
        return t;
    };
    try {
        const auto& dir = header.at("tensors");
        const auto& steps = header.at("step_counts");
        if (dir.size() % 3 != 0) throw CorruptCheckpointError("tensor directory is incomplete");
        for (std::size_t i = 0; i < dir.size(); i += 3) {
            nn::ParamState p;
            p.name = dir[i].at("name").get<std::string>();
            p.value = read_tensor(dir[i], p.name);
            p.adam_m = read_tensor(dir[i + 1], p.name + "#adam_m");
            p.adam_v = read_tensor(dir[i + 2], p.name + "#adam_v");
            if (p.adam_m.shape != p.value.shape || p.adam_v.shape != p.value.shape) {
                throw CorruptCheckpointError("optimizer state shape mismatch for " + p.name);
            }
            p.step_count = steps.at(p.name).get<std::uint64_t>();
            ckpt.params.push_back(std::move(p));
        }
    } catch (const nlohmann::json::exception& e) {
        throw CorruptCheckpointError(std::string("tensor directory: ") + e.what());
    }
    if (expected != payload_size) {
        throw CorruptCheckpointError("payload is " + std::to_string(payload_size) + " bytes, directory describes " +
                                     std::to_string(expected));
    }
    return ckpt;
}

inline void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    const auto bytes = serialize_checkpoint(ckpt);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("short write to " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return parse_checkpoint(bytes);
}

}  // namespace aide
