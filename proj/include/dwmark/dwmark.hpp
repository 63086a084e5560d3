#pragma once

// Dispersed blind image watermarking: sparse random block embedding with a
// keyed spread-spectrum block codec, attack simulation, segmentation-driven
// watermark synchronization and similarity-based message fusion.

#include "dwmark/attacks.hpp"
#include "dwmark/codec.hpp"
#include "dwmark/common.hpp"
#include "dwmark/crc8.hpp"
#include "dwmark/fusion.hpp"
#include "dwmark/image.hpp"
#include "dwmark/image_io.hpp"
#include "dwmark/message.hpp"
#include "dwmark/metrics.hpp"
#include "dwmark/pipeline.hpp"
#include "dwmark/placement.hpp"
#include "dwmark/sync.hpp"
