#pragma once

#include "addressing.hpp"
#include "corridor.hpp"
#include "geometry.hpp"
#include "graph.hpp"
#include "mapdata.hpp"
#include "protocol.hpp"
#include "rng.hpp"
#include "routes.hpp"
#include "simnet.hpp"
#include "synth.hpp"
