#ifndef SACNET_SAMPLING_HPP
#define SACNET_SAMPLING_HPP

#include <cstddef>

namespace sacnet {

/// Four-corner bilinear stencil for one fractional location (px = column,
/// py = row). Corners outside the map have index -1 and contribute zero.
struct BilinearTaps {
  long index[4];
  double weight[4];
  double d_dx[4];  // d(weight)/d(px)
  double d_dy[4];  // d(weight)/d(py)
};

BilinearTaps bilinear_taps(std::size_t height, std::size_t width, double px, double py);

}  // namespace sacnet

#endif  // SACNET_SAMPLING_HPP
