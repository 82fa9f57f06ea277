#pragma once

#include "randprompt/checkpoint.hpp"
#include "randprompt/embedding_store.hpp"
#include "randprompt/errors.hpp"
#include "randprompt/harness.hpp"
#include "randprompt/metrics.hpp"
#include "randprompt/mlp.hpp"
#include "randprompt/prompts.hpp"
#include "randprompt/rng.hpp"
#include "randprompt/scores.hpp"
#include "randprompt/scoring.hpp"
