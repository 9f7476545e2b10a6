#pragma once

#include "aide/codec.hpp"
#include "aide/data.hpp"
#include "aide/eval.hpp"
#include "aide/frequency.hpp"
#include "aide/gradient_suite.hpp"
#include "aide/imageio.hpp"
#include "aide/model/aide_model.hpp"
#include "aide/model/checkpoint.hpp"
#include "aide/model/config.hpp"
#include "aide/model/embedding.hpp"
#include "aide/model/train.hpp"
#include "aide/nn/adamw.hpp"
#include "aide/nn/gradcheck.hpp"
#include "aide/nn/layers.hpp"
#include "aide/perturb.hpp"
#include "aide/srm.hpp"
