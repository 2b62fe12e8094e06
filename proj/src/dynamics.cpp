#include "soro/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <sstream>
#include <thread>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace soro {

namespace {

int g_threads = 1;

int env_thread_cap() {
  static const int cap = [] {
    const char* v = std::getenv("SORO_SPT_THREADS");
    if (!v) return 1 << 20;
    const int n = std::atoi(v);
    return n >= 1 ? n : 1;
  }();
  return cap;
}

// Compensated accumulation keeps masked subset sums consistent with the
// whole-grid sum to a few ulps; the core/pert additivity contract is checked
// at 1e-12 and plain summation does not reliably clear it.
struct KahanMat6 {
  Mat6 sum = Mat6::Zero();
  Mat6 comp = Mat6::Zero();
  void add(const Mat6& v) {
    const Mat6 y = v - comp;
    const Mat6 t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
};

struct KahanDouble {
  double sum = 0.0;
  double comp = 0.0;
  void add(double v) {
    const double y = v - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
};

// Node-local sums for one (section, mask) pair. Middles follow the masked
// integrals with J = [A Jp, T] and Jdot = [A Jdp - ad_u A Jp, Td]:
//   M  : J' Ma J          C1 : J' ad*_eta Ma J
//   C2 : J' Ma Jdot       D  : J' Dg J ||nu||      N : J' M Ad_rel^-1
struct SectionSums {
  KahanMat6 k_ma, r_ma, s_ma;
  KahanMat6 k_c1, r_c1a, r_c1b, s_c1;
  KahanMat6 k_c2u, r_c2t, r_c2u, s_c2;
  KahanMat6 k_d, r_d, s_d;
  KahanMat6 k_n, r_n;
  KahanDouble w_sum;
};

Vec6 drag_geom_halved(const RobotModel& m, int section) {
  // Per-unit-length references: projected width 2r for cross flow; the axial
  // entry integrates to one frontal disc area pi r^2 over the full arm.
  const double r = m.sections[section].radius;
  const double coef = 0.5 * m.fluid.water_density * m.fluid.drag_coefficient;
  Vec6 d = Vec6::Zero();
  d[3] = coef * std::numbers::pi * r * r / m.total_length();
  d[4] = coef * 2.0 * r;
  d[5] = coef * 2.0 * r;
  return d;
}

using Mat12 = Eigen::Matrix<double, 12, 12>;
using Mat12x6 = Eigen::Matrix<double, 12, 6>;
using Mat6x12 = Eigen::Matrix<double, 6, 12>;

// Backward composite kernels, one set per (section, mask).
struct Kernels {
  Mat6 g_m = Mat6::Zero();
  Mat6 g_c1 = Mat6::Zero();
  Mat6 g_d = Mat6::Zero();
  Mat12 g_c2 = Mat12::Zero();
  Mat6 g_n = Mat6::Zero();
};

struct SweepContext {
  const RobotModel* model;
  const JointState* state;
  SectionArcs arcs;
  std::vector<Vec6> eta_prefix;  // body twist at the start of each section
  std::vector<double> bounds;
};

// Reused across calls: repeated assembly dominates the simulation loop and
// fresh allocations of the per-section buffers fragment the heap when arms
// of different sizes alternate (the benchmark does exactly that).
struct AssemblyWorkspace {
  SweepContext ctx;
  std::vector<std::vector<SectionSums>> sums;
  std::vector<std::vector<Kernels>> kern;
  std::vector<double> buoy_factor;
  std::vector<Mat6> ap;
  MatX jp, jdp;
};

AssemblyWorkspace& workspace() {
  thread_local AssemblyWorkspace ws;
  return ws;
}

void fill_context(SweepContext& ctx, const RobotModel& m, const JointState& state) {
  ctx.model = &m;
  ctx.state = &state;
  const int n = m.num_sections();
  ctx.arcs.full.clear();
  ctx.arcs.full.reserve(n);
  ctx.arcs.prefix_rel.clear();
  ctx.arcs.prefix_rel.reserve(n + 1);
  ctx.arcs.prefix_rel.push_back(Pose::identity());
  for (int k = 0; k < n; ++k) {
    ctx.arcs.full.push_back(eval_arc(state.q.segment<6>(6 * k),
                                     state.qdot.segment<6>(6 * k),
                                     m.sections[k].length));
    ctx.arcs.prefix_rel.push_back(
        ctx.arcs.prefix_rel.back().compose(ctx.arcs.full.back().pose));
  }
  ctx.bounds = m.boundaries();
  ctx.eta_prefix.assign(n + 1, Vec6::Zero());
  for (int k = 0; k < n; ++k) {
    const Vec6 u = ctx.arcs.full[k].tangent * state.qdot.segment<6>(6 * k);
    ctx.eta_prefix[k + 1] = ctx.arcs.full[k].ad_inv * ctx.eta_prefix[k] + u;
  }
}

void accumulate_section(const SweepContext& ctx, int sec,
                        const std::vector<const AbscissaMask*>& masks,
                        std::vector<SectionSums>& sums_for_section) {
  const RobotModel& m = *ctx.model;
  const int per = m.microsolids_per_section;
  const double len = m.sections[sec].length;
  const double h = len / (per - 1);
  const Vec6 xi = ctx.state->q.segment<6>(6 * sec);
  const Vec6 xidot = ctx.state->qdot.segment<6>(6 * sec);
  const DerivedSection der = derived_quantities(m.sections[sec]);
  const Vec6 ma_diag = der.screw_inertia_diag + m.added_mass_diag;
  const Vec6 mg_diag = der.screw_inertia_diag;
  const Vec6 drag_diag = drag_geom_halved(m, sec);
  const bool added_mass_zero = m.added_mass_diag.isZero(0.0);
  const Vec6 etap = ctx.eta_prefix[sec];

  // March the node arc quantities with the one-parameter subgroup rules for
  // the uniform spacing h:
  //   A_{j} = A_h A_{j-1},  T_j = T_{j-1} + T_h A_{j-1},
  //   Ad_{j} = Ad_h A_{j-1} + A_h Ad_{j-1},
  //   Td_j = Td_{j-1} + Td_h A_{j-1} + T_h Ad_{j-1},
  // so every node costs the same handful of 6x6 products.
  const ArcData arc_h = eval_arc(xi, xidot, h);
  const Mat6 adot_h = -ad_small(arc_h.tangent * xidot) * arc_h.ad_inv;
  Mat6 A = Mat6::Identity();
  Mat6 T = Mat6::Zero();
  Mat6 Td = Mat6::Zero();
  Mat6 Adot = Mat6::Zero();

  for (int j = 0; j < per; ++j) {
    if (j > 0) {
      const Mat6 a_prev = A;
      A = arc_h.ad_inv * a_prev;
      Td = Td + arc_h.tangent_dot * a_prev + arc_h.tangent * Adot;
      Adot = adot_h * a_prev + arc_h.ad_inv * Adot;
      T = T + arc_h.tangent * a_prev;
    }
    const double x_global = ctx.bounds[sec] + j * h;
    int which = -1;
    for (size_t mi = 0; mi < masks.size(); ++mi) {
      if (masks[mi]->contains(x_global)) { which = static_cast<int>(mi); break; }
    }
    if (which < 0) continue;
    SectionSums& s = sums_for_section[which];

    const double w = (j == 0 || j == per - 1) ? 0.5 * h : h;
    const Vec6 u = T * xidot;
    const Vec6 eta = A * etap + u;
    if (!eta.allFinite() || !A.allFinite() || !T.allFinite()) {
      std::ostringstream os;
      os << "non-finite intermediate at node " << j << " of section " << sec
         << " (X = " << x_global << ")";
      throw AssemblyError(os.str());
    }

    const Mat6 AtMa = A.transpose() * ma_diag.asDiagonal();
    const Mat6 TtMa = T.transpose() * ma_diag.asDiagonal();
    s.k_ma.add(w * (AtMa * A));
    s.r_ma.add(w * (AtMa * T));
    s.s_ma.add(w * (TtMa * T));

    const Mat6 B1 = ad_small(eta, true) * ma_diag.asDiagonal();
    const Mat6 B1A = B1 * A;
    const Mat6 B1T = B1 * T;
    s.k_c1.add(w * (A.transpose() * B1A));
    s.r_c1a.add(w * (A.transpose() * B1T));
    s.r_c1b.add(w * (T.transpose() * B1A));
    s.s_c1.add(w * (T.transpose() * B1T));

    const Mat6 aduA = ad_small(u) * A;
    s.k_c2u.add(w * (AtMa * aduA));
    s.r_c2t.add(w * (AtMa * Td));
    s.r_c2u.add(w * (TtMa * aduA));
    s.s_c2.add(w * (TtMa * Td));

    const double speed = linear(eta).norm();
    if (speed > 0.0) {
      const Vec6 dg = (w * speed) * drag_diag;
      const Mat6 AtD = A.transpose() * dg.asDiagonal();
      s.k_d.add(AtD * A);
      s.r_d.add(AtD * T);
      s.s_d.add(T.transpose() * dg.asDiagonal() * T);
    }

    if (added_mass_zero) {
      // With M_a == M the buoyancy middles coincide with the mass middles.
    } else {
      const Mat6 AtM = A.transpose() * mg_diag.asDiagonal();
      s.k_n.add(AtM * A);
      s.r_n.add(T.transpose() * mg_diag.asDiagonal() * A);
    }
    s.w_sum.add(w);
  }
}

// Every block of the dense terms is written exactly once by the stitch, so
// reused buffers only need the right shape, not a zero fill.
void ensure_shape(DynamicsTerms& t, int dof) {
  t.mass.resize(dof, dof);
  t.coriolis1.resize(dof, dof);
  t.coriolis2.resize(dof, dof);
  t.drag.resize(dof, dof);
  t.buoyancy.resize(dof, 6);
  t.tip_force.resize(dof);
  t.internal.resize(dof);
}

void assemble_masked(const RobotModel& m, const JointState& state,
                     const std::vector<const AbscissaMask*>& masks,
                     std::vector<DynamicsTerms*>& out) {
  state.require_dims(m);
  const int n = m.num_sections();
  const int dof = m.dof();
  const size_t nm = masks.size();
  for (auto* t : out) ensure_shape(*t, dof);

  AssemblyWorkspace& ws = workspace();
  fill_context(ws.ctx, m, state);
  const SweepContext& ctx = ws.ctx;

  // Phase 1: per-section node sums; independent across sections.
  auto& sums = ws.sums;
  sums.resize(n);
  for (auto& v : sums) v.assign(nm, SectionSums{});
  const int workers = std::min({assembly_threads(), n, 64});
  if (workers <= 1) {
    for (int sec = 0; sec < n; ++sec) accumulate_section(ctx, sec, masks, sums[sec]);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (int sec = w; sec < n; sec += workers) {
            accumulate_section(ctx, sec, masks, sums[sec]);
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  // Phase 2: backward sweep of composite kernels, then a forward stitch.
  // Every cross block (k, l) of a masked integral telescopes through the
  // section chain: with jcol_k the k-th prefix Jacobian block, the downstream
  // node sums enter as a 6x6 (12x12 for the Jdot-coupled term) composite
  //   G_l = K_{l+1} + A_{l+1}^T G_{l+1} A_{l+1},
  // so each section contributes one p x 6 column fill and one 6 x p row fill
  // instead of a p x p product.
  const bool added_mass_zero = m.added_mass_diag.isZero(0.0);
  auto& buoy_factor = ws.buoy_factor;
  auto& ap = ws.ap;
  buoy_factor.resize(n);
  ap.resize(n);
  for (int sec = 0; sec < n; ++sec) {
    buoy_factor[sec] = 1.0 - m.fluid.water_density / m.sections[sec].density;
    ap[sec] = buoy_factor[sec] *
              adjoint_inverse_unchecked(ctx.arcs.prefix_rel[sec]);
  }

  auto& kern = ws.kern;
  kern.resize(n);
  for (auto& v : kern) v.assign(nm, Kernels{});
  for (int sec = n - 2; sec >= 0; --sec) {
    const int up = sec + 1;
    const Mat6& A = ctx.arcs.full[up].ad_inv;
    const Vec6 u = ctx.arcs.full[up].tangent * state.qdot.segment<6>(6 * up);
    Mat12 phi = Mat12::Zero();
    phi.topLeftCorner<6, 6>() = A;
    phi.bottomRightCorner<6, 6>() = A;
    phi.bottomLeftCorner<6, 6>() = -ad_small(u) * A;
    for (size_t mi = 0; mi < nm; ++mi) {
      const SectionSums& s = sums[up][mi];
      const Kernels& next = kern[up][mi];
      Kernels& here = kern[sec][mi];
      here.g_m = s.k_ma.sum + A.transpose() * next.g_m * A;
      here.g_c1 = s.k_c1.sum + A.transpose() * next.g_c1 * A;
      here.g_d = s.k_d.sum + A.transpose() * next.g_d * A;
      Mat12 k2 = Mat12::Zero();
      k2.topLeftCorner<6, 6>() = -s.k_c2u.sum;
      k2.topRightCorner<6, 6>() = s.k_ma.sum;
      here.g_c2 = k2 + phi.transpose() * next.g_c2 * phi;
      const Mat6& kn = added_mass_zero ? s.k_ma.sum : s.k_n.sum;
      here.g_n = kn * ap[up] + A.transpose() * next.g_n;
    }
  }

  MatX& jp = ws.jp;
  MatX& jdp = ws.jdp;
  jp.resize(6, dof);
  jdp.resize(6, dof);
  jp.setZero();
  jdp.setZero();
  for (int sec = 0; sec < n; ++sec) {
    const int p = 6 * sec;
    const Vec6 xi = state.q.segment<6>(p);
    const Vec6 xidot = state.qdot.segment<6>(p);
    const Vec6 wrench = internal_wrench(m, xi, xidot, sec);
    const ArcData& fa = ctx.arcs.full[sec];
    const Mat6& A = fa.ad_inv;
    const Mat6& T = fa.tangent;
    const Mat6& Td = fa.tangent_dot;
    const Vec6 u = T * xidot;
    const Mat6 ad_u = ad_small(u);
    Mat12 phi = Mat12::Zero();
    phi.topLeftCorner<6, 6>() = A;
    phi.bottomRightCorner<6, 6>() = A;
    phi.bottomLeftCorner<6, 6>() = -ad_u * A;
    Mat12x6 t_stack;
    t_stack.topRows<6>() = T;
    t_stack.bottomRows<6>() = Td;

    for (size_t mi = 0; mi < nm; ++mi) {
      const SectionSums& s = sums[sec][mi];
      const Kernels& g = kern[sec][mi];
      DynamicsTerms& t = *out[mi];
      const auto Jp = jp.leftCols(p);
      const auto Jdp = jdp.leftCols(p);

      const Mat6 gmT = g.g_m * T;
      const Mat6 gc1T = g.g_c1 * T;
      const Mat6 gc1A = g.g_c1 * A;
      const Mat6 gdT = g.g_d * T;
      const Mat12x6 gc2T = g.g_c2 * t_stack;
      const Mat12 gc2P = g.g_c2 * phi;

      if (p > 0) {
        const MatX col_m = Jp.transpose() * (s.r_ma.sum + A.transpose() * gmT);
        t.mass.block(0, p, p, 6) = col_m;
        t.mass.block(p, 0, 6, p) = col_m.transpose();

        t.coriolis1.block(0, p, p, 6).noalias() =
            Jp.transpose() * (s.r_c1a.sum + A.transpose() * gc1T);
        t.coriolis1.block(p, 0, 6, p).noalias() =
            (s.r_c1b.sum + T.transpose() * gc1A) * Jp;

        const MatX col_d = Jp.transpose() * (s.r_d.sum + A.transpose() * gdT);
        t.drag.block(0, p, p, 6) = col_d;
        t.drag.block(p, 0, 6, p) = col_d.transpose();

        Mat12x6 c2_col = phi.transpose() * gc2T;
        c2_col.topRows<6>() += s.r_c2t.sum;
        t.coriolis2.block(0, p, p, 6).noalias() =
            Jp.transpose() * c2_col.topRows<6>();
        t.coriolis2.block(0, p, p, 6).noalias() +=
            Jdp.transpose() * c2_col.bottomRows<6>();
        Mat6x12 c2_row = t_stack.transpose() * gc2P;
        c2_row.leftCols<6>() -= s.r_c2u.sum;
        c2_row.rightCols<6>() += s.r_ma.sum.transpose();
        t.coriolis2.block(p, 0, 6, p).noalias() = c2_row.leftCols<6>() * Jp;
        t.coriolis2.block(p, 0, 6, p).noalias() += c2_row.rightCols<6>() * Jdp;
      }
      t.mass.block(p, p, 6, 6) = s.s_ma.sum + T.transpose() * gmT;
      t.coriolis1.block(p, p, 6, 6) = s.s_c1.sum + T.transpose() * gc1T;
      t.coriolis2.block(p, p, 6, 6) =
          s.s_c2.sum + t_stack.transpose() * gc2T;
      t.drag.block(p, p, 6, 6) = s.s_d.sum + T.transpose() * gdT;
      const Mat6 rn = added_mass_zero ? Mat6(s.r_ma.sum.transpose()) : s.r_n.sum;
      t.buoyancy.block(p, 0, 6, 6) = rn * ap[sec] + T.transpose() * g.g_n;
      t.internal.segment<6>(p) = -s.w_sum.sum * wrench;
    }

    // Advance the prefix Jacobian blocks through this section's full arc.
    if (p > 0) {
      const MatX aJp = A * jp.leftCols(p);
      jdp.leftCols(p) = A * jdp.leftCols(p).eval() - ad_u * aJp;
      jp.leftCols(p) = aJp;
    }
    jp.middleCols(p, 6) = T;
    jdp.middleCols(p, 6) = Td;
  }

  const VecX tip = tip_wrench_force(m, state.q);
  for (auto* t : out) t->tip_force = tip;
}

}  // namespace

AbscissaMask AbscissaMask::full(double L) {
  AbscissaMask m;
  m.intervals.push_back({0.0, L, true});
  return m;
}

bool AbscissaMask::contains(double X) const {
  for (const auto& iv : intervals) {
    if (X >= iv.lo && (iv.closed_right ? X <= iv.hi : X < iv.hi)) return true;
  }
  return false;
}

void AbscissaMask::validate(double L) const {
  const double tol = 1e-9 * (1.0 + L);
  auto sorted = intervals;
  std::sort(sorted.begin(), sorted.end(),
            [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
  for (size_t i = 0; i < sorted.size(); ++i) {
    if (sorted[i].lo < -tol || sorted[i].hi > L + tol || sorted[i].hi < sorted[i].lo) {
      throw std::invalid_argument("abscissa mask interval outside [0, L]");
    }
    if (i > 0 && sorted[i].lo < sorted[i - 1].hi - tol) {
      throw std::invalid_argument("abscissa mask intervals overlap");
    }
  }
}

DynamicsTerms SplitTerms::combined() const {
  DynamicsTerms t = core;
  t.mass += pert.mass;
  t.coriolis1 += pert.coriolis1;
  t.coriolis2 += pert.coriolis2;
  t.drag += pert.drag;
  t.buoyancy += pert.buoyancy;
  t.internal += pert.internal;
  return t;
}

Mat6 drag_matrix_at(const RobotModel& m, const Vec6& eta, double X) {
  const auto bounds = m.boundaries();
  int sec = m.num_sections() - 1;
  for (int k = 0; k < m.num_sections(); ++k) {
    if (X <= bounds[k + 1]) { sec = k; break; }
  }
  return (drag_geom_halved(m, sec) * linear(eta).norm()).asDiagonal();
}

Vec6 internal_wrench(const RobotModel& m, const Vec6& xi, const Vec6& xidot,
                     int section) {
  const DerivedSection d = derived_quantities(m.sections[section]);
  return d.stiffness_diag.asDiagonal() * (xi - m.sections[section].rest_strain) +
         d.viscosity_diag.asDiagonal() * xidot;
}

VecX tip_wrench_force(const RobotModel& m, const VecX& q) {
  if (m.tip_load.isZero(0.0)) return VecX::Zero(m.dof());
  return jacobian(m, q, m.actuation_abscissa).transpose() * m.tip_load;
}

void assemble_terms_into(const RobotModel& m, const JointState& state,
                         const AbscissaMask& mask, DynamicsTerms& out_terms) {
  mask.validate(m.total_length());
  std::vector<const AbscissaMask*> masks{&mask};
  std::vector<DynamicsTerms*> out{&out_terms};
  assemble_masked(m, state, masks, out);
}

DynamicsTerms assemble_terms(const RobotModel& m, const JointState& state,
                             const AbscissaMask& mask) {
  DynamicsTerms t;
  assemble_terms_into(m, state, mask, t);
  return t;
}

void assemble_split_into(const RobotModel& m, const JointState& state,
                         const AbscissaMask& core_mask,
                         const AbscissaMask& pert_mask, SplitTerms& out_terms) {
  core_mask.validate(m.total_length());
  pert_mask.validate(m.total_length());
  std::vector<const AbscissaMask*> masks{&core_mask, &pert_mask};
  std::vector<DynamicsTerms*> out{&out_terms.core, &out_terms.pert};
  assemble_masked(m, state, masks, out);
}

SplitTerms assemble_split(const RobotModel& m, const JointState& state,
                          const AbscissaMask& core_mask,
                          const AbscissaMask& pert_mask) {
  SplitTerms st;
  assemble_split_into(m, state, core_mask, pert_mask, st);
  return st;
}

VecX forward_dynamics(const DynamicsTerms& terms, const VecX& qdot,
                      const VecX& u, const Vec6& gravity_base) {
  const VecX rhs = u + terms.internal + terms.tip_force +
                   terms.buoyancy * gravity_base - terms.velocity_matrix() * qdot;
  const double scale = 1.0 + rhs.norm();

  Eigen::LLT<MatX> llt(terms.mass);
  if (llt.info() == Eigen::Success) {
    const VecX x = llt.solve(rhs);
    if ((terms.mass * x - rhs).norm() <= 1e-8 * scale) return x;
  }
  Eigen::LDLT<MatX> ldlt(terms.mass);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
    const VecX x = ldlt.solve(rhs);
    if ((terms.mass * x - rhs).norm() <= 1e-8 * scale) return x;
  }
  Eigen::SelfAdjointEigenSolver<MatX> es(terms.mass, Eigen::EigenvaluesOnly);
  std::ostringstream os;
  os << "mass matrix not SPD (smallest eigenvalue estimate "
     << (es.info() == Eigen::Success ? es.eigenvalues().minCoeff()
                                     : std::nan(""))
     << ")";
  throw AssemblyError(os.str());
}

double elastic_potential(const RobotModel& m, const VecX& q) {
  double u = 0.0;
  for (int k = 0; k < m.num_sections(); ++k) {
    const DerivedSection d = derived_quantities(m.sections[k]);
    const Vec6 dev = q.segment<6>(6 * k) - m.sections[k].rest_strain;
    u += 0.5 * m.sections[k].length *
         dev.dot(d.stiffness_diag.asDiagonal() * dev);
  }
  return u;
}

void set_assembly_threads(int n) {
  g_threads = std::clamp(n, 1, env_thread_cap());
}

int assembly_threads() { return g_threads; }

}  // namespace soro
