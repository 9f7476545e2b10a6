#pragma once

// AIDE-EMB1 embedding table: "AIDE-EMB1", u32 count, u32 dim, then per record
// u16 id length, id bytes (UTF-8), dim little-endian float32.

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "aide/error.hpp"

namespace aide {

inline constexpr char embedding_magic[] = "AIDE-EMB1";
inline constexpr std::size_t embedding_magic_len = 9;

class EmbeddingTable {
public:
    EmbeddingTable() = default;
    explicit EmbeddingTable(std::size_t dim) : dim_(dim) {}

    void insert(const std::string& id, std::vector<float> vec) {
        if (vec.size() != dim_) throw FormatError("embedding for '" + id + "' has wrong dimension");
        if (!entries_.emplace(id, std::move(vec)).second) throw FormatError("duplicate embedding id '" + id + "'");
        order_.push_back(id);
    }

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return order_.size(); }
    bool contains(const std::string& id) const { return entries_.count(id) != 0; }
    const std::vector<std::string>& ids() const { return order_; }

    const std::vector<float>& at(const std::string& id) const {
        const auto it = entries_.find(id);
        if (it == entries_.end()) throw UnknownIdError(id);
        return it->second;
    }

private:
    std::size_t dim_ = 0;
    std::map<std::string, std::vector<float>> entries_;
    std::vector<std::string> order_;
};

namespace detail {

template <class T>
void put_le(std::vector<std::uint8_t>& out, T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
}

template <class T>
T get_le(const std::uint8_t* p) {
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(T{p[i]} << (8 * i));
    return v;
}

}  // namespace detail

inline std::vector<std::uint8_t> serialize_embedding_table(const EmbeddingTable& table) {
    std::vector<std::uint8_t> out(embedding_magic, embedding_magic + embedding_magic_len);
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(table.size()));
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(table.dim()));
    for (const auto& id : table.ids()) {
        if (id.size() > 0xffff) throw FormatError("embedding id longer than 65535 bytes");
        detail::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(id.size()));
        out.insert(out.end(), id.begin(), id.end());
        for (float f : table.at(id)) detail::put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(f));
    }
    return out;
}

inline EmbeddingTable parse_embedding_table(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < embedding_magic_len + 8 ||
        std::memcmp(bytes.data(), embedding_magic, embedding_magic_len) != 0) {
        throw FormatError("embedding table: bad magic");
    }
    std::size_t pos = embedding_magic_len;
    const auto count = detail::get_le<std::uint32_t>(&bytes[pos]);
    const auto dim = detail::get_le<std::uint32_t>(&bytes[pos + 4]);
    pos += 8;
    EmbeddingTable table(dim);
    for (std::uint32_t r = 0; r < count; ++r) {
        const std::string where = "embedding table record " + std::to_string(r);
        if (pos + 2 > bytes.size()) throw FormatError(where + ": truncated id length");
        const auto len = detail::get_le<std::uint16_t>(&bytes[pos]);
        pos += 2;
        if (pos + len + std::size_t{dim} * 4 > bytes.size()) throw FormatError(where + ": truncated");
        std::string id(reinterpret_cast<const char*>(&bytes[pos]), len);
        pos += len;
        if (table.contains(id)) throw FormatError(where + ": duplicate id '" + id + "'");
        std::vector<float> vec(dim);
        for (std::uint32_t d = 0; d < dim; ++d, pos += 4) {
            vec[d] = std::bit_cast<float>(detail::get_le<std::uint32_t>(&bytes[pos]));
        }
        table.insert(id, std::move(vec));
    }
    if (pos != bytes.size()) throw FormatError("embedding table: trailing bytes after record " + std::to_string(count));
    return table;
}

inline void save_embedding_table(const EmbeddingTable& table, const std::filesystem::path& path) {
    const auto bytes = serialize_embedding_table(table);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline EmbeddingTable load_embedding_table(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return parse_embedding_table(bytes);
}

}  // namespace aide
