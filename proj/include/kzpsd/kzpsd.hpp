#pragma once

#include <kzpsd/error.hpp>
#include <kzpsd/fft.hpp>
#include <kzpsd/kernels.hpp>
#include <kzpsd/link.hpp>
#include <kzpsd/nls.hpp>
#include <kzpsd/parallel.hpp>
#include <kzpsd/perturbation.hpp>
#include <kzpsd/psd.hpp>
#include <kzpsd/quartets.hpp>
#include <kzpsd/spectral.hpp>
#include <kzpsd/statistics.hpp>
#include <kzpsd/wdm.hpp>
