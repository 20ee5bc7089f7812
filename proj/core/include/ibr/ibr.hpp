#pragma once

#include "ibr/dataset.hpp"
#include "ibr/engine.hpp"
#include "ibr/error.hpp"
#include "ibr/harness.hpp"
#include "ibr/kernel.hpp"
#include "ibr/linalg.hpp"
#include "ibr/spectral.hpp"
#include "ibr/tps.hpp"
