#pragma once

#include "memsq/errors.hpp"
#include "memsq/tridiagonal.hpp"
#include "memsq/domain.hpp"
#include "memsq/elliptic.hpp"
#include "memsq/parabolic.hpp"
#include "memsq/quench_analysis.hpp"
#include "memsq/criticality.hpp"
#include "memsq/io/config.hpp"
#include "memsq/io/manifest.hpp"
#include "memsq/io/outputs.hpp"
#include "memsq/io/sweep_store.hpp"
