#pragma once

#include <iosfwd>
#include <vector>

#include "cycledance/tensor.hpp"

namespace cycledance {

/// TNSR blob: magic "TNSR", u32 rank, u64 extents, f64 row-major payload,
/// all little-endian. Checkpoints are sequences of these.
void tnsr_write(std::ostream& os, const Shape& shape, const std::vector<double>& data);
void tnsr_write(std::ostream& os, const Tensor& t);

struct TnsrBlob {
  Shape shape;
  std::vector<double> data;
};

TnsrBlob tnsr_read(std::istream& is);

}  // namespace cycledance
