#pragma once

#include "topobi/error.hpp"
#include "topobi/rng.hpp"
#include "topobi/vocab.hpp"
#include "topobi/graph.hpp"
#include "topobi/canonical.hpp"
#include "topobi/sequence.hpp"
#include "topobi/grammar.hpp"
#include "topobi/ingest.hpp"
#include "topobi/augment.hpp"
#include "topobi/lm.hpp"
#include "topobi/spice.hpp"
#include "topobi/metrics.hpp"
