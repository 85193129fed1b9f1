#pragma once

#include "ussl/augment.hpp"
#include "ussl/autodiff.hpp"
#include "ussl/checkpoint.hpp"
#include "ussl/config.hpp"
#include "ussl/datasets.hpp"
#include "ussl/history.hpp"
#include "ussl/losses.hpp"
#include "ussl/metrics.hpp"
#include "ussl/model.hpp"
#include "ussl/optim.hpp"
#include "ussl/pseudolabel.hpp"
#include "ussl/rng.hpp"
#include "ussl/tensor.hpp"
#include "ussl/trainer.hpp"
