#pragma once

#include <filesystem>

#include "darkflash/image.hpp"
#include "darkflash/json.hpp"
#include "darkflash/raw.hpp"

namespace darkflash {

// 16-bit binary PGM (big-endian samples) plus a <stem>.json sidecar carrying
// CFA pattern, ADC depth, black level, camera id and exposure settings.
void write_raw_pgm(const std::filesystem::path& pgm_path, const RawFrame& raw);
RawFrame read_raw_pgm(const std::filesystem::path& pgm_path);

// PFM, little-endian (scale -1.0), bottom-up rows; 1 or 3 channels.
void write_pfm(const std::filesystem::path& path, const LinearImage& img);
LinearImage read_pfm(const std::filesystem::path& path);

void write_json_file(const std::filesystem::path& path, const Json& j);
Json read_json_file(const std::filesystem::path& path);

Json settings_to_json(const ExposureSettings& s);
ExposureSettings settings_from_json(const Json& j);

}  // namespace darkflash
