#pragma once

#include "topoembed/raster.hpp"

#include <filesystem>
#include <string>

namespace topoembed {

/// Reads a single-band EPSG:4326 GeoTIFF. Supports strip and tile layouts,
/// 8/16/32-bit integer and 32/64-bit float samples, no/LZW/deflate
/// compression and horizontal differencing. Nodata comes from the
/// GDAL_NODATA tag.
ElevationRaster read_geotiff(const std::filesystem::path& path);
ElevationRaster decode_geotiff(const std::string& bytes);

/// Writes an uncompressed little-endian float32 GeoTIFF. Output bytes depend
/// only on the raster contents.
void write_geotiff(const std::filesystem::path& path, const ElevationRaster& raster);
std::string encode_geotiff(const ElevationRaster& raster);

} // namespace topoembed
