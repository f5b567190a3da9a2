#pragma once

#include "analysis.hpp"
#include "config.hpp"
#include "error.hpp"
#include "faddeeva.hpp"
#include "fitting.hpp"
#include "format.hpp"
#include "ingest.hpp"
#include "kernels.hpp"
#include "observables.hpp"
#include "params.hpp"
#include "quadrature.hpp"
#include "records.hpp"
#include "units.hpp"
#include "wavepacket.hpp"
