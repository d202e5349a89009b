#pragma once

#include "faithful/error.hpp"
#include "faithful/graph.hpp"
#include "faithful/types.hpp"
#include "faithful/stats.hpp"
#include "faithful/lsem.hpp"
#include "faithful/discovery.hpp"
#include "faithful/adversary.hpp"
#include "faithful/io.hpp"
#include "faithful/harness.hpp"
