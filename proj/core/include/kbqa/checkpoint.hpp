#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>

#include "kbqa/tensor.hpp"

namespace kbqa {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr char kCheckpointMagic[4] = {'F', 'R', 'N', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary layout, all integers and floats little-endian:
///   "FRNK" | u32 version | u32 count | count x record   (parameter values)
///                        | u32 count | count x record   (Adagrad accumulators)
///   record = u32 name_len | name bytes | u32 rows | u32 cols | rows*cols f32
void write_checkpoint(std::ostream& out, std::span<const Parameter* const> params);

/// Restores values and accumulators into `params`, matched by name. Throws
/// CheckpointError on bad magic, version, missing names or shape mismatch.
void read_checkpoint(std::istream& in, std::span<Parameter* const> params);

void save_checkpoint(const std::filesystem::path& path,
                     std::span<const Parameter* const> params);
void load_checkpoint(const std::filesystem::path& path,
                     std::span<Parameter* const> params);

}  // namespace kbqa
