#pragma once

#include "urdusum/checkpoint.hpp"
#include "urdusum/commands.hpp"
#include "urdusum/config.hpp"
#include "urdusum/corpus.hpp"
#include "urdusum/decoding.hpp"
#include "urdusum/document.hpp"
#include "urdusum/error.hpp"
#include "urdusum/evaluation.hpp"
#include "urdusum/io.hpp"
#include "urdusum/model.hpp"
#include "urdusum/numerics.hpp"
#include "urdusum/preprocess.hpp"
#include "urdusum/rng.hpp"
#include "urdusum/training.hpp"
#include "urdusum/utf8.hpp"
