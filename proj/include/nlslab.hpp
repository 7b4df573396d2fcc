#pragma once

// Everything except the command-line layer (nlslab/cli.hpp).

#include "nlslab/diagnostics.hpp"
#include "nlslab/dynamics.hpp"
#include "nlslab/eqspec.hpp"
#include "nlslab/field.hpp"
#include "nlslab/groundstate.hpp"
#include "nlslab/hartree.hpp"
#include "nlslab/morawetz.hpp"
#include "nlslab/nonlinearity.hpp"
#include "nlslab/profile_io.hpp"
#include "nlslab/verify.hpp"
