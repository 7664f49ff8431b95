#pragma once

#include <filesystem>

#include "pnpsr/grid.hpp"
#include "pnpsr/solver.hpp"

namespace pnpsr::io {

// Raw raster files: u32 height, u32 width (little-endian), then row-major
// little-endian pixels. ".f32"/".raw" carry float32 pixels, ".f64" float64.

void write_raw_f32(const std::filesystem::path& path, const ImageGrid& image);
void write_raw_f64(const std::filesystem::path& path, const ImageGrid& image);
ImageGrid read_raw(const std::filesystem::path& path);

/// Grayscale PNG, written at 16 bits. Values are clamped to [0,1] and scaled
/// to 65535. Reading accepts 8 or 16-bit grayscale (or RGB, converted to
/// luma) and divides by the format maximum.
void write_png16(const std::filesystem::path& path, const ImageGrid& image);
ImageGrid read_png(const std::filesystem::path& path);

/// Dispatches on extension: .png, .f32/.raw, .f64.
ImageGrid read_image(const std::filesystem::path& path);

/// Kernels use the raw format only; the raster must be square with odd side.
void write_kernel(const std::filesystem::path& path, const KernelGrid& kernel);
void write_kernel_f64(const std::filesystem::path& path, const KernelGrid& kernel);
KernelGrid read_kernel(const std::filesystem::path& path);

/// Columns: k,f,phi,F,H,lambda_k,backtracks,branch,stationarity,wall_ms.
/// Row k=0 holds the initial point. With `timing` false wall_ms is written
/// as 0 so identical runs give identical bytes.
void write_trace_csv(const std::filesystem::path& path, const IterationTrace& trace, bool timing);

}  // namespace pnpsr::io
