// cylres.hpp: umbrella header.
#pragma once

#include "cylres/error.hpp"
#include "cylres/numerics.hpp"
#include "cylres/parallel.hpp"
#include "cylres/geometry.hpp"
#include "cylres/models.hpp"
#include "cylres/transforms.hpp"
#include "cylres/free_resolvent.hpp"
#include "cylres/perturbation.hpp"
#include "cylres/spectral.hpp"
#include "cylres/io.hpp"
#include "cylres/cli.hpp"
