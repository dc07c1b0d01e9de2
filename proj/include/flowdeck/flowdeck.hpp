#pragma once

// Everything, for programs that do not care about include granularity.

#include "flowdeck/behavior.hpp"
#include "flowdeck/corpus.hpp"
#include "flowdeck/data.hpp"
#include "flowdeck/dataset.hpp"
#include "flowdeck/error.hpp"
#include "flowdeck/harness.hpp"
#include "flowdeck/ingest.hpp"
#include "flowdeck/json_io.hpp"
#include "flowdeck/kernels.hpp"
#include "flowdeck/network.hpp"
#include "flowdeck/ops.hpp"
#include "flowdeck/plan.hpp"
#include "flowdeck/program.hpp"
#include "flowdeck/reference.hpp"
#include "flowdeck/runtime.hpp"
#include "flowdeck/semantic_graph.hpp"
#include "flowdeck/topology.hpp"
#include "flowdeck/trace.hpp"
#include "flowdeck/value.hpp"
