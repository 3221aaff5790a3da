// Rank-3 laminate material model restricted to equilateral-triangle layer layouts.
//
// A cell is described by three relative layer widths a[0..2] and one orientation
// angle t3; layer normals are t3 + 2pi/3, t3 + pi/3, t3. The homogenized plane
// stress stiffness is evaluated in a rotated tensor basis where the laminate
// correction is a closed-form 3x3 matrix of trigonometric moments, then mapped
// to the engineering Voigt matrix S with [s11; s22; s12] = S * [e11; e22; g12].
#pragma once

#include <Eigen/Dense>
#include <array>

#include "trilat/common.hpp"

namespace trilat {

using Mat3 = Eigen::Matrix3d;
// Engineering Voigt stiffness: [s11; s22; s12] = S [e11; e22; g12]. With this
// strain convention the matrix entries are the tensor components themselves:
// [[S1111, S1122, S1112], [., S2222, S2221], [., ., S1212]].
using ElasticityMatrix = Mat3;

struct MaterialConstants {
  double e_plus = 1.0;    // stiff phase Young modulus
  double e_minus = 1e-6;  // soft phase Young modulus
  double v0 = 0.3;        // Poisson ratio (both phases)
};

struct LaminateSpec {
  std::array<double, 3> alpha{0, 0, 0};  // relative layer widths in [0,1]
  double theta3 = 0;                     // normal angle of layer 3

  // Normal angles of layers 1..3 (index 0..2).
  std::array<double, 3> layer_normals() const {
    return {theta3 + 2.0 * kPi / 3.0, theta3 + kPi / 3.0, theta3};
  }
  // Tangent angles (normals rotated by pi/2).
  std::array<double, 3> layer_tangents() const {
    return {theta3 + 2.0 * kPi / 3.0 + kPi / 2.0, theta3 + kPi / 3.0 + kPi / 2.0,
            theta3 + kPi / 2.0};
  }
};

// Total relative density 1 - prod(1 - a_n).
double volume_fraction(const std::array<double, 3>& alpha);
// d(volume_fraction)/d(a_n).
std::array<double, 3> volume_fraction_grad(const std::array<double, 3>& alpha);

// Physical per-layer densities of the sequential construction (sum = volume_fraction).
std::array<double, 3> layer_densities(const std::array<double, 3>& alpha);

// Stiffness contribution weights p_n = a_n / sum(a); equal widths give equal
// weights, which keeps the equal-width laminate isotropic. All-zero widths
// fall back to p = 1/3 each.
std::array<double, 3> layer_weights(const std::array<double, 3>& alpha);

// Trigonometric moments m1..m4 = sum_n p_n {cos 2t_n, sin 2t_n, cos 4t_n, sin 4t_n}
// over the layer normal angles. Weights must be non-negative and sum to 1 (1e-9).
std::array<double, 4> trig_moments(const std::array<double, 3>& weights,
                                   const std::array<double, 3>& normals);
// Same with normals derived from theta3 by the equilateral offsets.
std::array<double, 4> trig_moments(const std::array<double, 3>& weights, double theta3);

// Isotropic plane stress Hooke matrix in engineering Voigt form.
Mat3 hooke_plane_stress(double e, double v);

// Fourth-order plane tensor with the usual minor/major symmetries; six
// independent components.
struct Tensor4 {
  double s1111 = 0, s2222 = 0, s1122 = 0, s1112 = 0, s2221 = 0, s1212 = 0;
};

// Rotated orthonormal tensor basis <-> component forms. In the rotated basis a
// symmetric 3x3 matrix represents the tensor and matrix inversion equals tensor
// inversion.
Mat3 rotated_from_tensor(const Tensor4& t);
Tensor4 tensor_from_rotated(const Mat3& m);
// Engineering Voigt matrix from tensor components (and back).
Mat3 voigt_from_tensor(const Tensor4& t);
Tensor4 tensor_from_voigt(const Mat3& m);
// rotated -> tensor -> rotated; used to pin the two transforms as exact inverses.
Mat3 rotated_roundtrip(const Mat3& m);

// Unit layer-correction tensor for one layer with normal angle `theta`.
Tensor4 layer_lambda(double theta, double v0);

// Homogenized stiffness, engineering Voigt. Optional outputs:
//  dS: sensitivities w.r.t. (a1, a2, a3, theta3), analytic.
//  bracket_rcond: reciprocal condition estimate of the inverted 3x3 bracket.
Mat3 elasticity_matrix(const LaminateSpec& spec, const MaterialConstants& mat,
                       std::array<Mat3, 4>* dS = nullptr,
                       double* bracket_rcond = nullptr);

// Same stiffness assembled from the explicit fourth-order layer tensors; the
// two routes are pinned against each other in the tests.
Mat3 elasticity_matrix_tensor_route(const LaminateSpec& spec, const MaterialConstants& mat);

// Free-orientation variant: three independent layer normals. `dS` holds
// sensitivities w.r.t. (a1, a2, a3, n1, n2, n3).
Mat3 elasticity_matrix_free(const std::array<double, 3>& alpha,
                            const std::array<double, 3>& normals,
                            const MaterialConstants& mat,
                            std::array<Mat3, 6>* dS = nullptr);

}  // namespace trilat
