#pragma once

#include "otca/checkpoint.hpp"
#include "otca/error.hpp"
#include "otca/flow_env.hpp"
#include "otca/grpo.hpp"
#include "otca/moca.hpp"
#include "otca/numerics.hpp"
#include "otca/optim.hpp"
#include "otca/proxy_eval.hpp"
#include "otca/rewards.hpp"
#include "otca/tcd.hpp"
#include "otca/harness/ablation.hpp"
#include "otca/harness/config.hpp"
#include "otca/harness/experiment.hpp"
