#include "mpmlite/scene.hpp"

#include "mpmlite/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace mpmlite {

template <int dim>
bool Shape<dim>::contains(const Vec<dim>& x) const {
  switch (kind) {
    case ShapeKind::Box:
      return (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
    case ShapeKind::Sphere:
      return (x - center).squaredNorm() <= radius * radius;
    case ShapeKind::Cylinder: {
      Vec<dim> r = x - center;
      if (std::abs(r[axis]) > half_length) return false;
      r[axis] = 0.0;
      return r.squaredNorm() <= radius * radius;
    }
  }
  return false;
}

template <int dim>
void Shape<dim>::bounds(Vec<dim>& lo_out, Vec<dim>& hi_out) const {
  switch (kind) {
    case ShapeKind::Box:
      lo_out = lo;
      hi_out = hi;
      return;
    case ShapeKind::Sphere:
      lo_out = center - Vec<dim>::Constant(radius);
      hi_out = center + Vec<dim>::Constant(radius);
      return;
    case ShapeKind::Cylinder:
      lo_out = center - Vec<dim>::Constant(radius);
      hi_out = center + Vec<dim>::Constant(radius);
      lo_out[axis] = center[axis] - half_length;
      hi_out[axis] = center[axis] + half_length;
      return;
  }
}

template <int dim>
Mat<dim> Shape<dim>::initial_velocity_gradient() const {
  Mat<dim> G = Mat<dim>::Zero();
  if constexpr (dim == 2) {
    G(0, 1) = -angular_velocity.z();
    G(1, 0) = angular_velocity.z();
  } else {
    const Eigen::Vector3d& w = angular_velocity;
    G << 0.0, -w.z(), w.y(), w.z(), 0.0, -w.x(), -w.y(), w.x(), 0.0;
  }
  return G;
}

template <int dim>
Vec<dim> Shape<dim>::initial_velocity(const Vec<dim>& x) const {
  const Vec<dim> r = x - center;
  Vec<dim> v = velocity;
  if constexpr (dim == 2) {
    const double w = angular_velocity.z();
    v += Vec<dim>(-w * r.y(), w * r.x());
  } else {
    v += angular_velocity.cross(r);
  }
  return v;
}

template <int dim>
double Shape<dim>::analytic_volume() const {
  switch (kind) {
    case ShapeKind::Box:
      return (hi - lo).prod();
    case ShapeKind::Sphere:
      return dim == 2 ? std::numbers::pi * radius * radius : 4.0 / 3.0 * std::numbers::pi * std::pow(radius, 3);
    case ShapeKind::Cylinder:
      return dim == 2 ? 2.0 * radius * 2.0 * half_length : std::numbers::pi * radius * radius * 2.0 * half_length;
  }
  return 0.0;
}

template <int dim>
IVec<dim> balanced_strata(int ppc) {
  if (ppc < 1) throw ConfigError("ppc must be >= 1");
  std::vector<int> primes;
  int n = ppc;
  for (int f = 2; f * f <= n; ++f)
    while (n % f == 0) {
      primes.push_back(f);
      n /= f;
    }
  if (n > 1) primes.push_back(n);
  std::sort(primes.rbegin(), primes.rend());
  IVec<dim> s = IVec<dim>::Ones();
  for (int p : primes) {
    int smallest = 0;
    for (int a = 1; a < dim; ++a)
      if (s[a] < s[smallest]) smallest = a;
    s[smallest] *= p;
  }
  return s;
}

template <int dim>
std::vector<Particle<dim>> seed_particles(const Shape<dim>& shape, const MaterialModel& material,
                                          const GridDesc<dim>& grid, std::mt19937_64& rng) {
  if (shape.ppc < 1) throw ConfigError("ppc must be >= 1");
  if (!(shape.jitter >= 0.0 && shape.jitter <= 1.0)) throw ConfigError("jitter must lie in [0, 1]");
  const IVec<dim> strata = shape.strata ? *shape.strata : balanced_strata<dim>(shape.ppc);
  if (strata.prod() != shape.ppc || (strata.array() < 1).any())
    throw ConfigError("shape strata must be positive and multiply to ppc");

  Vec<dim> lo, hi;
  shape.bounds(lo, hi);
  const double dx = grid.dx;
  for (int a = 0; a < dim; ++a) {
    const double min_x = grid.origin[a] + 2.0 * dx;
    const double max_x = grid.origin[a] + (grid.dims[a] - 2) * dx;
    if (lo[a] < min_x - 1e-12 * dx || hi[a] > max_x + 1e-12 * dx)
      throw ConfigError("shape extends outside the grid interior (2-cell clearance required)");
  }

  IVec<dim> c_lo, c_hi;
  for (int a = 0; a < dim; ++a) {
    c_lo[a] = std::max(0, static_cast<int>(std::floor((lo[a] - grid.origin[a]) / dx)));
    c_hi[a] = std::min(grid.dims[a] - 1, static_cast<int>(std::ceil((hi[a] - grid.origin[a]) / dx)));
  }

  const double vol = std::pow(dx, dim) / shape.ppc;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Particle<dim>> out;

  IVec<dim> c = c_lo;
  while (true) {
    const Vec<dim> cell_lo = grid.origin + c.template cast<double>() * dx;
    for (int k = 0; k < shape.ppc; ++k) {
      IVec<dim> sub;
      int rem = k;
      for (int a = dim - 1; a >= 0; --a) {
        sub[a] = rem % strata[a];
        rem /= strata[a];
      }
      Vec<dim> x;
      for (int a = 0; a < dim; ++a) {
        const double h = dx / strata[a];
        const double u = shape.jitter > 0.0 ? shape.jitter * (unit(rng) - 0.5) : 0.0;
        x[a] = cell_lo[a] + (sub[a] + 0.5 + u) * h;
      }
      if (!shape.contains(x)) continue;
      Particle<dim> p;
      p.volume = vol;
      p.mass = material.density * vol;
      p.x = x;
      p.v = shape.initial_velocity(x);
      p.G = shape.initial_velocity_gradient();
      p.material = shape.material;
      out.push_back(p);
    }
    int a = dim - 1;
    while (a >= 0 && c[a] == c_hi[a]) {
      c[a] = c_lo[a];
      --a;
    }
    if (a < 0) break;
    ++c[a];
  }
  return out;
}

template <int dim>
void Collider<dim>::validate() {
  switch (kind) {
    case ColliderKind::HalfSpace: {
      const double n = normal.norm();
      if (!(n > 0.0)) throw ConfigError("half-space collider needs a non-zero normal");
      normal /= n;
      break;
    }
    case ColliderKind::Sphere:
      if (!(radius > 0.0)) throw ConfigError("sphere collider needs radius > 0");
      break;
    case ColliderKind::Box:
      if ((hi.array() <= lo.array()).any()) throw ConfigError("box collider needs hi > lo");
      break;
  }
}

template <int dim>
double Collider<dim>::phi(const Vec<dim>& x, double t) const {
  const Vec<dim> shift = velocity * t;
  switch (kind) {
    case ColliderKind::HalfSpace:
      return (x - point - shift).dot(normal);
    case ColliderKind::Sphere:
      return (x - center - shift).norm() - radius;
    case ColliderKind::Box: {
      const Vec<dim> y = x - shift;
      const Vec<dim> c = 0.5 * (lo + hi), h = 0.5 * (hi - lo);
      const Vec<dim> q = (y - c).cwiseAbs() - h;
      const double outside = q.cwiseMax(0.0).norm();
      const double inside = std::min(q.maxCoeff(), 0.0);
      return outside + inside;
    }
  }
  return 1.0;
}

template <int dim>
Vec<dim> Collider<dim>::normal_at(const Vec<dim>& x, double t) const {
  const Vec<dim> shift = velocity * t;
  switch (kind) {
    case ColliderKind::HalfSpace:
      return normal;
    case ColliderKind::Sphere: {
      const Vec<dim> r = x - center - shift;
      const double n = r.norm();
      return n > 0.0 ? Vec<dim>(r / n) : Vec<dim>(Vec<dim>::UnitY());
    }
    case ColliderKind::Box: {
      const Vec<dim> y = x - shift;
      const Vec<dim> c = 0.5 * (lo + hi), h = 0.5 * (hi - lo);
      const Vec<dim> q = (y - c).cwiseAbs() - h;
      int axis = 0;
      for (int a = 1; a < dim; ++a)
        if (q[a] > q[axis]) axis = a;
      Vec<dim> n = Vec<dim>::Zero();
      n[axis] = y[axis] >= c[axis] ? 1.0 : -1.0;
      return n;
    }
  }
  return Vec<dim>::UnitY();
}

void SolverConfig::validate() const {
  if (newton_max_iters < 1 || pcg_max_iters < 1) throw ConfigError("solver iteration caps must be >= 1");
  if (!(newton_tol > 0.0) || !(pcg_tol > 0.0) || !(newton_abs_tol > 0.0))
    throw ConfigError("solver tolerances must be > 0");
  if (!(cfl > 0.0 && cfl <= 1.0)) throw ConfigError("cfl must lie in (0, 1]");
}

template <int dim>
void SceneConfig<dim>::validate() {
  grid.validate();
  if (!(dt_step > 0.0) || !(dt_frame > 0.0)) throw ConfigError("dt_step and dt_frame must be > 0");
  if (dt_step > dt_frame) throw ConfigError("dt_step must not exceed dt_frame");
  if (frames < 0) throw ConfigError("frames must be >= 0");
  if (flip_blend && !(*flip_blend >= 0.0 && *flip_blend <= 1.0)) throw ConfigError("flip_blend must lie in [0, 1]");
  if (boundary_cells < 1) throw ConfigError("boundary_cells must be >= 1");
  if (materials.empty()) throw ConfigError("at least one material is required");
  for (const MaterialModel& m : materials) m.validate(dim);
  for (const Shape<dim>& s : shapes) {
    if (s.material < 0 || s.material >= static_cast<int>(materials.size()))
      throw ConfigError("shape references unknown material " + std::to_string(s.material));
    if (s.ppc < 1) throw ConfigError("ppc must be >= 1");
  }
  for (Collider<dim>& c : colliders) c.validate();
  solver.validate();
}

template <int dim>
int SceneConfig<dim>::steps_per_frame() const {
  return std::max(1, static_cast<int>(std::ceil(dt_frame / dt_step - 1e-9)));
}

#define MPMLITE_INSTANTIATE(D)                                                             \
  template struct Shape<D>;                                                                \
  template struct Collider<D>;                                                             \
  template struct SceneConfig<D>;                                                          \
  template IVec<D> balanced_strata<D>(int);                                                \
  template std::vector<Particle<D>> seed_particles<D>(const Shape<D>&, const MaterialModel&, \
                                                      const GridDesc<D>&, std::mt19937_64&);

MPMLITE_INSTANTIATE(2)
MPMLITE_INSTANTIATE(3)
#undef MPMLITE_INSTANTIATE

}  // namespace mpmlite
