#include "tp/kernels.hpp"

namespace tp::kernels {

const Ops& scalar_ops() {
  static const Ops t = {
      &scalar::add<float>,
      &scalar::sub<float>,
      &scalar::mul<float>,
      &scalar::scale<float>,
      &scalar::axpy<float>,
      &scalar::vexp<float>,
      &scalar::vsigmoid<float>,
      &scalar::vsoftplus<float>,
      &scalar::vrelu<float>,
      &scalar::sum<float>,
      &scalar::dot<float>,
      &scalar::gemm<float>,
  };
  return t;
}

}  // namespace tp::kernels
