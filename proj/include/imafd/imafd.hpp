#ifndef IMAFD_IMAFD_HPP
#define IMAFD_IMAFD_HPP

#include "imafd/bank_io.hpp"
#include "imafd/clustering.hpp"
#include "imafd/decision.hpp"
#include "imafd/error.hpp"
#include "imafd/features.hpp"
#include "imafd/idss.hpp"
#include "imafd/manifest.hpp"
#include "imafd/metrics.hpp"
#include "imafd/pipeline.hpp"
#include "imafd/projection.hpp"
#include "imafd/raster.hpp"
#include "imafd/render.hpp"
#include "imafd/rse.hpp"
#include "imafd/run_config.hpp"
#include "imafd/tensor_io.hpp"

#endif // IMAFD_IMAFD_HPP
