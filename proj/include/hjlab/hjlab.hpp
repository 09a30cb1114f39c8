#pragma once

#include "hjlab/prf.hpp"
#include "hjlab/geometry.hpp"
#include "hjlab/segment.hpp"
#include "hjlab/environment.hpp"
#include "hjlab/raster_oracle.hpp"
#include "hjlab/hamiltonian.hpp"
#include "hjlab/solver.hpp"
#include "hjlab/certificates.hpp"
#include "hjlab/stochastics.hpp"
#include "hjlab/io.hpp"
