#pragma once

#include "gsrnn/adam.hpp"
#include "gsrnn/baselines.hpp"
#include "gsrnn/checkpoint.hpp"
#include "gsrnn/errors.hpp"
#include "gsrnn/eval.hpp"
#include "gsrnn/graph.hpp"
#include "gsrnn/model.hpp"
#include "gsrnn/panel.hpp"
#include "gsrnn/reference.hpp"
#include "gsrnn/regularization.hpp"
#include "gsrnn/rng.hpp"
#include "gsrnn/rnn.hpp"
#include "gsrnn/tape.hpp"
#include "gsrnn/tensor.hpp"
#include "gsrnn/verify.hpp"
