#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "medirl/grid.hpp"
#include "medirl/tensor.hpp"

namespace medirl {

// FTEN binary tensor format, version 1. All multi-byte fields little-endian,
// payload row-major:
//   magic "FTEN" | version u16 | dtype u8 (1 = float32) | ndim u8
//   | dims u32 × ndim | element count u64 | payload f32 × count
Tensor read_tensor(const std::filesystem::path& path);
void write_tensor(const std::filesystem::path& path, const Tensor& t);

/// Whole-file atomic write: writes to a sibling temp file, then renames.
void atomic_write_file(const std::filesystem::path& path, const std::string& contents);

// Fixation CSV: header `driver_id,frame_index,x,y,duration_ms`, one sequence
// per driver_id, rows in trajectory order.
std::vector<FixationSequence> read_fixation_csv(const std::filesystem::path& path,
                                                const std::string& video_id);
void write_fixation_csv(const std::filesystem::path& path,
                        const std::vector<FixationSequence>& sequences);

/// Fixed-format double for CSV/JSON artifacts (round-trip exact, locale-free).
std::string format_double(double x);

}  // namespace medirl
