#pragma once

#include <filesystem>

#include "maskfuse/pipeline.hpp"

namespace maskfuse {

// Output directory layout:
//   classes.json          class registry, consumed masks, stage report, config echo, seed
//   mhat_<index>.pgm      16-bit global class maps
//   cloud.ply             merged labeled point cloud
//   config_echo.json      resolved configuration, loadable with --config
//   partition_debug.json  per-stage partitions (when `debug` is set)
void write_result(const SegmentationResult& result, const PipelineConfig& config, const std::filesystem::path& dir,
                  bool debug = true);

// Restores classes, consumed masks, class maps and the merged cloud.
SegmentationResult read_result(const std::filesystem::path& dir);

}  // namespace maskfuse
