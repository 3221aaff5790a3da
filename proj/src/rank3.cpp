#include "trilat/rank3.hpp"

#include <cmath>

namespace trilat {

namespace {

// Keep (1 - rho) strictly positive so the laminate bracket stays finite even
// when a width sits exactly at 1.
constexpr double kWidthCap = 1.0 - 1e-9;

void check_material(const MaterialConstants& mat) {
  if (!(mat.e_plus > 0)) throw ValidationError("rank3: e_plus must be positive");
  if (!(mat.e_minus >= 0) || !(mat.e_minus < mat.e_plus))
    throw ValidationError("rank3: need 0 <= e_minus < e_plus");
  if (!(std::abs(mat.v0) < 0.5)) throw ValidationError("rank3: need |v0| < 0.5");
}

std::array<double, 3> clamp_widths(const std::array<double, 3>& alpha) {
  std::array<double, 3> a = alpha;
  for (double& v : a) {
    if (!(v >= -1e-12) || !(v <= 1.0 + 1e-12))
      throw ValidationError("rank3: layer width outside [0, 1]");
    v = std::clamp(v, 0.0, kWidthCap);
  }
  return a;
}

// M and dM/dm_k per the closed moment form.
Mat3 moment_matrix(const std::array<double, 4>& m, double v0) {
  const double k = 1.0 / (4.0 * (1.0 - v0));
  Mat3 M;
  M << (3.0 - v0 - (1.0 + v0) * m[2]) * k, -(1.0 + v0) * m[3] * k, 0.5 * m[0],
      -(1.0 + v0) * m[3] * k, (3.0 - v0 + (1.0 + v0) * m[2]) * k, 0.5 * m[1],
      0.5 * m[0], 0.5 * m[1], 0.5;
  return M;
}

std::array<Mat3, 4> moment_matrix_derivs(double v0) {
  const double k = (1.0 + v0) / (4.0 * (1.0 - v0));
  std::array<Mat3, 4> d;
  d[0] = Mat3::Zero();
  d[0](0, 2) = d[0](2, 0) = 0.5;
  d[1] = Mat3::Zero();
  d[1](1, 2) = d[1](2, 1) = 0.5;
  d[2] = Mat3::Zero();
  d[2](0, 0) = -k;
  d[2](1, 1) = k;
  d[3] = Mat3::Zero();
  d[3](0, 1) = d[3](1, 0) = -k;
  return d;
}

// Isotropic Hooke in the rotated basis is diagonal.
Mat3 hooke_rotated(double e, double v) {
  Mat3 m = Mat3::Zero();
  m(0, 0) = e / (1.0 + v);
  m(1, 1) = e / (1.0 + v);
  m(2, 2) = e / (1.0 - v);
  return m;
}

Mat3 invert3_checked(const Mat3& b, const char* what, double* rcond_out) {
  double scale = b.cwiseAbs().maxCoeff();
  double det = b.determinant();
  if (!(scale > 0) || !(std::abs(det) > 1e-14 * scale * scale * scale))
    throw NumericalError(std::string("rank3: singular matrix in ") + what);
  Mat3 inv = b.inverse();
  if (rcond_out) {
    double n1 = b.cwiseAbs().colwise().sum().maxCoeff();
    double n2 = inv.cwiseAbs().colwise().sum().maxCoeff();
    *rcond_out = 1.0 / (n1 * n2);
  }
  return inv;
}

// Shared core: stiffness (and optional sensitivities) from widths + weights +
// per-layer normal angles. `dm_dx` maps design variables to moment derivatives.
template <size_t NV>
Mat3 laminate_core(const std::array<double, 3>& alpha_raw, const std::array<double, 3>& normals,
                   const MaterialConstants& mat, std::array<Mat3, NV>* dS, double* rcond,
                   bool rigid_rotation) {
  check_material(mat);
  std::array<double, 3> a = clamp_widths(alpha_raw);

  const double v0 = mat.v0;
  double one_m = (1.0 - a[0]) * (1.0 - a[1]) * (1.0 - a[2]);
  double rho = 1.0 - one_m;

  double T = a[0] + a[1] + a[2];
  std::array<double, 3> p;
  if (T < 1e-12) {
    p = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  } else {
    p = {a[0] / T, a[1] / T, a[2] / T};
  }

  std::array<double, 4> mom{};
  std::array<double, 3> c2, s2, c4, s4;
  for (int n = 0; n < 3; ++n) {
    c2[n] = std::cos(2.0 * normals[n]);
    s2[n] = std::sin(2.0 * normals[n]);
    c4[n] = std::cos(4.0 * normals[n]);
    s4[n] = std::sin(4.0 * normals[n]);
    mom[0] += p[n] * c2[n];
    mom[1] += p[n] * s2[n];
    mom[2] += p[n] * c4[n];
    mom[3] += p[n] * s4[n];
  }

  Mat3 M = moment_matrix(mom, v0);
  Mat3 splus = hooke_rotated(mat.e_plus, v0);
  Mat3 sminus = hooke_rotated(mat.e_minus, v0);
  Mat3 d0 = invert3_checked(splus - sminus, "phase contrast (e_plus == e_minus?)", nullptr);
  const double c = (1.0 - v0 * v0) / mat.e_plus;
  Mat3 B = d0 - rho * c * M;
  Mat3 binv = invert3_checked(B, "laminate bracket", rcond);
  Mat3 srot = splus - (1.0 - rho) * binv;

  if (dS) {
    // dS'/dx = (drho/dx) B^-1 + (1-rho) B^-1 (dB/dx) B^-1,
    // dB/dx  = -c (drho/dx M + rho dM/dx).
    std::array<Mat3, 4> dMdm = moment_matrix_derivs(v0);
    std::array<double, 3> drho = {(1.0 - a[1]) * (1.0 - a[2]), (1.0 - a[0]) * (1.0 - a[2]),
                                  (1.0 - a[0]) * (1.0 - a[1])};
    auto accum = [&](double drho_dx, const Mat3& dM_dx) -> Mat3 {
      Mat3 dB = -c * (drho_dx * M + rho * dM_dx);
      return drho_dx * binv + (1.0 - rho) * binv * dB * binv;
    };
    for (int n = 0; n < 3; ++n) {
      Mat3 dM = Mat3::Zero();
      if (T >= 1e-12) {
        std::array<double, 4> dm{};
        for (int j = 0; j < 3; ++j) {
          double dp = ((j == n ? 1.0 : 0.0) - p[j]) / T;
          dm[0] += dp * c2[j];
          dm[1] += dp * s2[j];
          dm[2] += dp * c4[j];
          dm[3] += dp * s4[j];
        }
        for (int k = 0; k < 4; ++k) dM += dm[k] * dMdm[k];
      }
      (*dS)[n] = accum(drho[n], dM);
    }
    if (rigid_rotation) {
      // all normals advance together with theta3
      std::array<double, 4> dm = {-2.0 * mom[1], 2.0 * mom[0], -4.0 * mom[3], 4.0 * mom[2]};
      Mat3 dM = Mat3::Zero();
      for (int k = 0; k < 4; ++k) dM += dm[k] * dMdm[k];
      (*dS)[3] = accum(0.0, dM);
    } else {
      for (int n = 0; n < 3; ++n) {
        std::array<double, 4> dm = {-2.0 * p[n] * s2[n], 2.0 * p[n] * c2[n],
                                    -4.0 * p[n] * s4[n], 4.0 * p[n] * c4[n]};
        Mat3 dM = Mat3::Zero();
        for (int k = 0; k < 4; ++k) dM += dm[k] * dMdm[k];
        if (NV >= 6) (*dS)[3 + n] = accum(0.0, dM);
      }
    }
    // map every sensitivity through the linear rotated->Voigt transform
    for (auto& g : *dS) g = voigt_from_tensor(tensor_from_rotated(g));
  }

  return voigt_from_tensor(tensor_from_rotated(srot));
}

}  // namespace

double volume_fraction(const std::array<double, 3>& alpha) {
  std::array<double, 3> a = clamp_widths(alpha);
  return 1.0 - (1.0 - a[0]) * (1.0 - a[1]) * (1.0 - a[2]);
}

std::array<double, 3> volume_fraction_grad(const std::array<double, 3>& alpha) {
  std::array<double, 3> a = clamp_widths(alpha);
  return {(1.0 - a[1]) * (1.0 - a[2]), (1.0 - a[0]) * (1.0 - a[2]),
          (1.0 - a[0]) * (1.0 - a[1])};
}

std::array<double, 3> layer_densities(const std::array<double, 3>& alpha) {
  std::array<double, 3> a = clamp_widths(alpha);
  return {(1.0 - a[2]) * (1.0 - a[1]) * a[0], (1.0 - a[2]) * a[1], a[2]};
}

std::array<double, 3> layer_weights(const std::array<double, 3>& alpha) {
  std::array<double, 3> a = clamp_widths(alpha);
  double t = a[0] + a[1] + a[2];
  if (t < 1e-12) return {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  return {a[0] / t, a[1] / t, a[2] / t};
}

std::array<double, 4> trig_moments(const std::array<double, 3>& weights,
                                   const std::array<double, 3>& normals) {
  double sum = 0;
  for (double w : weights) {
    if (!(w >= -1e-12)) throw ValidationError("rank3: negative moment weight");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw ValidationError("rank3: moment weights must sum to 1");
  std::array<double, 4> m{};
  for (int n = 0; n < 3; ++n) {
    m[0] += weights[n] * std::cos(2.0 * normals[n]);
    m[1] += weights[n] * std::sin(2.0 * normals[n]);
    m[2] += weights[n] * std::cos(4.0 * normals[n]);
    m[3] += weights[n] * std::sin(4.0 * normals[n]);
  }
  return m;
}

std::array<double, 4> trig_moments(const std::array<double, 3>& weights, double theta3) {
  return trig_moments(weights, LaminateSpec{{0, 0, 0}, theta3}.layer_normals());
}

Mat3 hooke_plane_stress(double e, double v) {
  Mat3 m = Mat3::Zero();
  double f = e / (1.0 - v * v);
  m(0, 0) = m(1, 1) = f;
  m(0, 1) = m(1, 0) = v * f;
  m(2, 2) = f * (1.0 - v) / 2.0;  // = e / (2 (1 + v)), the tensor shear component
  return m;
}

Mat3 rotated_from_tensor(const Tensor4& t) {
  Mat3 m;
  m << 0.5 * (t.s1111 + t.s2222) - t.s1122, t.s1112 - t.s2221, 0.5 * (t.s1111 - t.s2222),
      t.s1112 - t.s2221, 2.0 * t.s1212, t.s1112 + t.s2221,
      0.5 * (t.s1111 - t.s2222), t.s1112 + t.s2221, 0.5 * (t.s1111 + t.s2222) + t.s1122;
  return m;
}

Tensor4 tensor_from_rotated(const Mat3& m) {
  Tensor4 t;
  t.s1111 = 0.5 * (m(0, 0) + m(2, 2)) + m(0, 2);
  t.s2222 = 0.5 * (m(0, 0) + m(2, 2)) - m(0, 2);
  t.s1122 = -0.5 * (m(0, 0) - m(2, 2));
  t.s1112 = 0.5 * (m(0, 1) + m(1, 2));
  t.s2221 = -0.5 * (m(0, 1) - m(1, 2));
  t.s1212 = 0.5 * m(1, 1);
  return t;
}

Mat3 voigt_from_tensor(const Tensor4& t) {
  Mat3 m;
  m << t.s1111, t.s1122, t.s1112, t.s1122, t.s2222, t.s2221, t.s1112, t.s2221, t.s1212;
  return m;
}

Tensor4 tensor_from_voigt(const Mat3& m) {
  Tensor4 t;
  t.s1111 = m(0, 0);
  t.s2222 = m(1, 1);
  t.s1122 = m(0, 1);
  t.s1112 = m(0, 2);
  t.s2221 = m(1, 2);
  t.s1212 = m(2, 2);
  return t;
}

Mat3 rotated_roundtrip(const Mat3& m) { return rotated_from_tensor(tensor_from_rotated(m)); }

Tensor4 layer_lambda(double theta, double v0) {
  double c2 = std::cos(2.0 * theta), s2 = std::sin(2.0 * theta);
  double c4 = std::cos(4.0 * theta), s4 = std::sin(4.0 * theta);
  double q = 1.0 / (4.0 * (1.0 - v0));
  Tensor4 t;
  t.s1111 = (c4 + 4.0 * c2 + 3.0) / 8.0 + (1.0 - c4) * q;
  t.s2222 = (c4 - 4.0 * c2 + 3.0) / 8.0 + (1.0 - c4) * q;
  t.s1122 = (1.0 - c4) / 8.0 - (1.0 - c4) * q;
  t.s1112 = (2.0 * s2 + s4) / 8.0 - s4 * q;
  t.s2221 = (2.0 * s2 - s4) / 8.0 + s4 * q;
  t.s1212 = (1.0 - c4) / 8.0 + (1.0 + c4) * q;
  return t;
}

Mat3 elasticity_matrix(const LaminateSpec& spec, const MaterialConstants& mat,
                       std::array<Mat3, 4>* dS, double* bracket_rcond) {
  return laminate_core<4>(spec.alpha, spec.layer_normals(), mat, dS, bracket_rcond, true);
}

Mat3 elasticity_matrix_tensor_route(const LaminateSpec& spec, const MaterialConstants& mat) {
  check_material(mat);
  std::array<double, 3> a = clamp_widths(spec.alpha);
  double rho = 1.0 - (1.0 - a[0]) * (1.0 - a[1]) * (1.0 - a[2]);
  std::array<double, 3> p = layer_weights(spec.alpha);
  std::array<double, 3> normals = spec.layer_normals();

  Tensor4 lam_sum;
  for (int n = 0; n < 3; ++n) {
    Tensor4 l = layer_lambda(normals[n], mat.v0);
    lam_sum.s1111 += p[n] * l.s1111;
    lam_sum.s2222 += p[n] * l.s2222;
    lam_sum.s1122 += p[n] * l.s1122;
    lam_sum.s1112 += p[n] * l.s1112;
    lam_sum.s2221 += p[n] * l.s2221;
    lam_sum.s1212 += p[n] * l.s1212;
  }

  Mat3 splus = rotated_from_tensor(tensor_from_voigt(hooke_plane_stress(mat.e_plus, mat.v0)));
  Mat3 sminus = rotated_from_tensor(tensor_from_voigt(hooke_plane_stress(mat.e_minus, mat.v0)));
  Mat3 M = rotated_from_tensor(lam_sum);
  Mat3 d0 = invert3_checked(splus - sminus, "phase contrast", nullptr);
  Mat3 B = d0 - rho * (1.0 - mat.v0 * mat.v0) / mat.e_plus * M;
  Mat3 srot = splus - (1.0 - rho) * invert3_checked(B, "laminate bracket", nullptr);
  return voigt_from_tensor(tensor_from_rotated(srot));
}

Mat3 elasticity_matrix_free(const std::array<double, 3>& alpha,
                            const std::array<double, 3>& normals,
                            const MaterialConstants& mat, std::array<Mat3, 6>* dS) {
  return laminate_core<6>(alpha, normals, mat, dS, nullptr, false);
}

}  // namespace trilat
