#pragma once

#include "autodiff.hpp"
#include "cells.hpp"
#include "checkpoint.hpp"
#include "codegraph.hpp"
#include "config.hpp"
#include "extractor.hpp"
#include "generator.hpp"
#include "ggnn.hpp"
#include "gradcheck.hpp"
#include "graph_io.hpp"
#include "keywords.hpp"
#include "metrics.hpp"
#include "pipeline.hpp"
#include "training.hpp"
#include "vocab.hpp"
