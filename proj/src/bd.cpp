#include "crddme/bd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "crddme/errors.hpp"
#include "crddme/parallel.hpp"

namespace crddme {

namespace {

struct Box {
  Vec2 lo, hi;
};

Box bounding_box(const Shape &s) {
  if (const auto *sq = std::get_if<SquareShape>(&s)) {
    const double h = sq->side / 2.0;
    return {{sq->center.x - h, sq->center.y - h}, {sq->center.x + h, sq->center.y + h}};
  }
  const auto &dk = std::get<DiskShape>(s);
  return {{dk.center.x - dk.radius, dk.center.y - dk.radius},
          {dk.center.x + dk.radius, dk.center.y + dk.radius}};
}

double diameter(const Shape &s) {
  const Box b = bounding_box(s);
  return norm(b.hi - b.lo);
}

Vec2 normal_pair(Rng &rng) {
  std::normal_distribution<double> n;
  const double x = n(rng);
  return {x, n(rng)};
}

} // namespace

void BDConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt))
    throw ConfigError("dt must be positive", "bd.dt");
  if (max_skip < 1)
    throw ConfigError("max_skip must be at least 1", "bd.max_skip");
  if (!(max_event_probability > 0.0 && max_event_probability < 1.0))
    throw ConfigError("max_event_probability must lie in (0, 1)", "bd.max_event_probability");
  if (!(max_drift_change > 0.0))
    throw ConfigError("max_drift_change must be positive", "bd.max_drift_change");
  if (species.empty())
    throw ConfigError("no species", "species");
  if (shape_area(domain) <= 0.0)
    throw ConfigError("domain has no area", "domain");
  const Box box = bounding_box(domain);
  const double diam = diameter(domain);
  for (std::size_t s = 0; s < species.size(); ++s) {
    const BDSpecies &sp = species[s];
    const std::string path = "species[" + std::to_string(s) + "]";
    if (!(sp.d > 0.0) || !std::isfinite(sp.d))
      throw ConfigError("diffusivity must be positive", path + ".diffusivity");
    if (sp.potential.is_nodal_table())
      throw ConfigError("Brownian dynamics needs a pointwise potential", path + ".potential");
    // Drift sanity bound on a probe grid.
    for (int a = 0; a <= 16; ++a)
      for (int b = 0; b <= 16; ++b) {
        const Vec2 p{box.lo.x + (box.hi.x - box.lo.x) * a / 16.0,
                     box.lo.y + (box.hi.y - box.lo.y) * b / 16.0};
        if (!shape_contains(domain, p))
          continue;
        if (sp.d * norm(sp.potential.gradient(p)) * dt >= diam)
          throw ConfigError("drift step exceeds the domain diameter; reduce dt", "bd.dt");
      }
  }
  const int ns = static_cast<int>(species.size());
  if (bimolecular) {
    const BDBimolecular &bi = *bimolecular;
    bi.kernel.validate();
    if (bi.a < 0 || bi.a >= ns || bi.b < 0 || bi.b >= ns || bi.a == bi.b || bi.c >= ns)
      throw ConfigError("bad species indices", "reactions.bimolecular");
    if (bi.dissociation && bi.c < 0)
      throw ConfigError("dissociation needs a product species", "reactions.bimolecular");
    if (bi.dissociation)
      if (const auto *f = std::get_if<FixedRateMode>(&*bi.dissociation); f && !(f->mu >= 0.0))
        throw ConfigError("mu must be non-negative", "reactions.bimolecular.mu");
  }
  for (const LinearReaction &l : linear)
    if (l.from < 0 || l.from >= ns || l.to < 0 || l.to >= ns || !(l.rate >= 0.0))
      throw ConfigError("bad linear reaction", "reactions.linear");
}

BDSimulator::BDSimulator(BDConfig config) : cfg_(std::move(config)) {
  cfg_.validate();
  const Box box = bounding_box(cfg_.domain);
  const double delta = 1e-4 * diameter(cfg_.domain);
  for (const BDSpecies &sp : cfg_.species) {
    double k = 0.0;
    if (!sp.potential.is_constant())
      for (int a = 0; a <= 32; ++a)
        for (int b = 0; b <= 32; ++b) {
          const Vec2 p{box.lo.x + (box.hi.x - box.lo.x) * a / 32.0,
                       box.lo.y + (box.hi.y - box.lo.y) * b / 32.0};
          if (!shape_contains(cfg_.domain, p))
            continue;
          const Vec2 gx = sp.potential.gradient({p.x + delta, p.y}) - sp.potential.gradient({p.x - delta, p.y});
          const Vec2 gy = sp.potential.gradient({p.x, p.y + delta}) - sp.potential.gradient({p.x, p.y - delta});
          k = std::max(k, std::max(norm(gx), norm(gy)) / (2.0 * delta));
        }
    curvature_.push_back(k);
  }
  if (cfg_.bimolecular && cfg_.bimolecular->dissociation) {
    const BDBimolecular &bi = *cfg_.bimolecular;
    const Mesh fine = generate_mesh(cfg_.domain, cfg_.partition_level);
    const auto &sa = cfg_.species[static_cast<std::size_t>(bi.a)];
    const auto &sb = cfg_.species[static_cast<std::size_t>(bi.b)];
    const auto &sc = cfg_.species[static_cast<std::size_t>(bi.c)];
    const double za = continuous_partition_function(fine, sa.potential).log_z;
    const double zb = continuous_partition_function(fine, sb.potential).log_z;
    const double zc = continuous_partition_function(fine, sc.potential).log_z;
    double k_d = 1.0;
    if (const auto *db = std::get_if<DetailedBalanceMode>(&*bi.dissociation)) {
      detailed_balance_ = true;
      k_d = db->k_d;
    } else {
      fixed_rate_ = std::get<FixedRateMode>(*bi.dissociation).mu;
    }
    ContinuousUnbinding::Options o;
    const Shape dom = cfg_.domain;
    o.inside = [dom](Vec2 p) { return shape_contains(dom, p); };
    unbinding_.emplace(bi.kernel, sa.potential, sb.potential, sc.potential, za, zb, zc, k_d,
                       std::move(o));
    if (detailed_balance_) {
      // Probe-grid maximum with headroom; run() checks it at every evaluation.
      double k = 0.0;
      for (int a = 0; a <= 32; ++a)
        for (int b = 0; b <= 32; ++b) {
          const Vec2 p{box.lo.x + (box.hi.x - box.lo.x) * a / 32.0,
                       box.lo.y + (box.hi.y - box.lo.y) * b / 32.0};
          if (shape_contains(cfg_.domain, p))
            k = std::max(k, unbinding_->rate(p));
        }
      rate_bound_ = 1.5 * k;
    } else {
      rate_bound_ = fixed_rate_;
    }
  }
}

bool BDSimulator::inside(Vec2 p) const { return shape_contains(cfg_.domain, p, 1e-12); }

Vec2 BDSimulator::reflect(Vec2 p) const {
  for (int it = 0; it < 100; ++it) {
    if (const auto *sq = std::get_if<SquareShape>(&cfg_.domain)) {
      const double h = sq->side / 2.0;
      const Vec2 lo{sq->center.x - h, sq->center.y - h}, hi{sq->center.x + h, sq->center.y + h};
      bool moved = false;
      if (p.x < lo.x) { p.x = 2.0 * lo.x - p.x; moved = true; }
      if (p.x > hi.x) { p.x = 2.0 * hi.x - p.x; moved = true; }
      if (p.y < lo.y) { p.y = 2.0 * lo.y - p.y; moved = true; }
      if (p.y > hi.y) { p.y = 2.0 * hi.y - p.y; moved = true; }
      if (!moved)
        return p;
    } else {
      const auto &dk = std::get<DiskShape>(cfg_.domain);
      const Vec2 v = p - dk.center;
      const double r = norm(v);
      if (r <= dk.radius)
        return p;
      p = dk.center + ((2.0 * dk.radius - r) / r) * v;
    }
  }
  std::ostringstream os;
  os.precision(17);
  os << "particle escaped the domain at (" << p.x << ", " << p.y << ")";
  throw NumericsError(os.str());
}

double BDSimulator::unbinding_rate(Vec2 z) const {
  if (!unbinding_)
    return 0.0;
  return detailed_balance_ ? unbinding_->rate(z) : fixed_rate_;
}

BDState BDSimulator::sample_initial(const std::vector<BDInitial> &initial, Rng &rng) const {
  BDState st;
  st.positions.assign(cfg_.species.size(), {});
  const Box box = bounding_box(cfg_.domain);
  for (const BDInitial &in : initial) {
    if (in.species < 0 || in.species >= static_cast<int>(cfg_.species.size()))
      throw ConfigError("initial placement names an unknown species");
    auto &list = st.positions[static_cast<std::size_t>(in.species)];
    for (int k = 0; k < in.count; ++k) {
      if (in.point) {
        if (!inside(*in.point))
          throw ConfigError("initial point lies outside the domain");
        list.push_back(*in.point);
        continue;
      }
      int tries = 0;
      while (true) {
        if (++tries > 10'000'000)
          throw ConfigError("initial region is empty or too small");
        const Vec2 p{box.lo.x + (box.hi.x - box.lo.x) * uniform01(rng),
                     box.lo.y + (box.hi.y - box.lo.y) * uniform01(rng)};
        if (shape_contains(cfg_.domain, p) && (!in.region || in.region(p))) {
          list.push_back(p);
          break;
        }
      }
    }
  }
  return st;
}

BDResult BDSimulator::run(BDState st, std::uint64_t seed, const BDRunOptions &opts) const {
  Rng rng(seed);
  const int ns = static_cast<int>(cfg_.species.size());
  if (static_cast<int>(st.positions.size()) != ns)
    throw ConfigError("BD state has the wrong number of species");
  const double dt = cfg_.dt;
  const auto to_units = [dt](double t) {
    return static_cast<std::uint64_t>(std::llround(std::max(t, 0.0) / dt));
  };
  const std::uint64_t u0 = to_units(st.t);
  const std::uint64_t u_end = std::isfinite(opts.t_end) ? to_units(opts.t_end) : ~0ULL;
  std::vector<std::uint64_t> sample_units;
  for (double t : opts.sample_times)
    sample_units.push_back(to_units(t));

  BDResult res;
  std::uint64_t u = u0;
  std::size_t si = 0;
  const BDBimolecular *bi = cfg_.bimolecular ? &*cfg_.bimolecular : nullptr;
  const double gamma = bi ? bi->kernel.gamma : 0.5;
  const double rb = bi ? bi->kernel.r_b : 0.0;
  const double rb2 = rb * rb;

  // Total linear rate per species and the pick order.
  std::vector<double> linear_total(static_cast<std::size_t>(ns), 0.0);
  for (const LinearReaction &l : cfg_.linear)
    linear_total[static_cast<std::size_t>(l.from)] += l.rate;

  std::vector<Vec2> c_start;
  std::vector<std::pair<int, int>> pairs;
  std::vector<char> used_a, used_b;
  std::vector<std::vector<Vec2>> next(static_cast<std::size_t>(ns));

  while (true) {
    st.t = static_cast<double>(u) * dt;
    while (si < sample_units.size() && sample_units[si] <= u) {
      if (opts.observer) {
        BDState snap = st;
        snap.t = opts.sample_times[si];
        opts.observer(si, snap);
      }
      ++si;
    }
    if (u >= u_end)
      break;
    if (opts.stop_on_association && std::isfinite(res.first_association))
      break;

    // Complex positions at the start of the step; unbinding is thinned
    // against rate_bound_ and evaluated there.
    c_start.clear();
    double event_rate = 0.0;
    if (bi && bi->c >= 0 && unbinding_) {
      c_start = st.positions[static_cast<std::size_t>(bi->c)];
      event_rate += rate_bound_ * static_cast<double>(c_start.size());
    }
    for (int s = 0; s < ns; ++s)
      event_rate += linear_total[static_cast<std::size_t>(s)] * st.count(s);

    // Merged step length in units of dt.
    std::uint64_t m = static_cast<std::uint64_t>(cfg_.max_skip);
    for (int s = 0; s < ns; ++s) {
      const double stiff = cfg_.species[static_cast<std::size_t>(s)].d * curvature_[static_cast<std::size_t>(s)] * dt;
      if (st.count(s) > 0 && stiff > 0.0 && cfg_.max_drift_change / stiff < static_cast<double>(m))
        m = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(cfg_.max_drift_change / stiff));
    }
    if (event_rate > 0.0)
      m = std::min<std::uint64_t>(
          m, std::max<std::uint64_t>(1, static_cast<std::uint64_t>(
                                            cfg_.max_event_probability / (event_rate * dt))));
    const bool can_bind = bi && st.count(bi->a) > 0 && st.count(bi->b) > 0;
    if (can_bind && m > 1) {
      const auto &pa = st.positions[static_cast<std::size_t>(bi->a)];
      const auto &pb = st.positions[static_cast<std::size_t>(bi->b)];
      if (pa.size() * pb.size() > 4096) {
        m = 1;
      } else {
        double d2 = std::numeric_limits<double>::infinity();
        for (const Vec2 &x : pa)
          for (const Vec2 &y : pb)
            d2 = std::min(d2, norm2(x - y));
        const double da = cfg_.species[static_cast<std::size_t>(bi->a)].d;
        const double db = cfg_.species[static_cast<std::size_t>(bi->b)].d;
        double v = 0.0;
        for (const Vec2 &x : pa)
          v = std::max(v, da * norm(cfg_.species[static_cast<std::size_t>(bi->a)].potential.gradient(x)));
        for (const Vec2 &y : pb)
          v = std::max(v, db * norm(cfg_.species[static_cast<std::size_t>(bi->b)].potential.gradient(y)));
        const double gap = std::sqrt(d2) - rb;
        // Six standard deviations of the relative displacement per axis,
        // times sqrt(2) for the diagonal.
        const double sigma = 6.0 * std::sqrt(2.0) * std::sqrt(2.0 * (da + db) * dt);
        std::uint64_t mm = 1;
        if (gap > sigma) {
          const double q = gap / sigma;
          mm = static_cast<std::uint64_t>(std::min(q * q, static_cast<double>(m)));
          while (mm > 1 && gap - 2.0 * v * static_cast<double>(mm) * dt <
                               sigma * std::sqrt(static_cast<double>(mm)))
            mm /= 2;
        }
        m = std::min(m, std::max<std::uint64_t>(mm, 1));
      }
    }
    m = std::min(m, u_end - u);
    if (si < sample_units.size())
      m = std::min(m, sample_units[si] - u);
    m = std::max<std::uint64_t>(m, 1);
    const double h = static_cast<double>(m) * dt;

    // Drift-diffusion with reflection.
    for (int s = 0; s < ns; ++s) {
      const BDSpecies &sp = cfg_.species[static_cast<std::size_t>(s)];
      const double amp = std::sqrt(2.0 * sp.d * h);
      for (Vec2 &x : st.positions[static_cast<std::size_t>(s)]) {
        const Vec2 g = sp.potential.is_constant() ? Vec2{} : sp.potential.gradient(x);
        x = reflect(x - (sp.d * h) * g + amp * normal_pair(rng));
      }
    }

    // First-order conversions.
    if (!cfg_.linear.empty()) {
      for (auto &nx : next)
        nx.clear();
      for (int s = 0; s < ns; ++s) {
        const double k = linear_total[static_cast<std::size_t>(s)];
        if (k <= 0.0)
          continue;
        const double p = -std::expm1(-k * h);
        auto &list = st.positions[static_cast<std::size_t>(s)];
        std::size_t keep = 0;
        for (std::size_t q = 0; q < list.size(); ++q) {
          if (uniform01(rng) < p) {
            double pick = uniform01(rng) * k;
            int to = cfg_.linear.back().to;
            for (const LinearReaction &l : cfg_.linear) {
              if (l.from != s)
                continue;
              if (pick < l.rate) {
                to = l.to;
                break;
              }
              pick -= l.rate;
            }
            next[static_cast<std::size_t>(to)].push_back(list[q]);
          } else {
            list[keep++] = list[q];
          }
        }
        list.resize(keep);
      }
      for (int s = 0; s < ns; ++s) {
        auto &list = st.positions[static_cast<std::size_t>(s)];
        list.insert(list.end(), next[static_cast<std::size_t>(s)].begin(),
                    next[static_cast<std::size_t>(s)].end());
      }
    }

    // Association among pairs within the reaction radius. Runs before
    // unbinding so that fresh products cannot rebind in the same step.
    if (bi && st.count(bi->a) > 0 && st.count(bi->b) > 0) {
      auto &pa = st.positions[static_cast<std::size_t>(bi->a)];
      auto &pb = st.positions[static_cast<std::size_t>(bi->b)];
      pairs.clear();
      if (pa.size() * pb.size() <= 4096) {
        for (std::size_t i = 0; i < pa.size(); ++i)
          for (std::size_t j = 0; j < pb.size(); ++j)
            if (norm2(pa[i] - pb[j]) <= rb2)
              pairs.emplace_back(static_cast<int>(i), static_cast<int>(j));
      } else {
        // Uniform-grid broad phase with cell size >= r_b.
        const Box box = bounding_box(cfg_.domain);
        const double cell = std::max(rb, (box.hi.x - box.lo.x) / 2048.0);
        const int nx = std::max(1, static_cast<int>(std::ceil((box.hi.x - box.lo.x) / cell)));
        const int ny = std::max(1, static_cast<int>(std::ceil((box.hi.y - box.lo.y) / cell)));
        auto cell_of = [&](Vec2 p) {
          const int cx = std::clamp(static_cast<int>((p.x - box.lo.x) / cell), 0, nx - 1);
          const int cy = std::clamp(static_cast<int>((p.y - box.lo.y) / cell), 0, ny - 1);
          return std::pair{cx, cy};
        };
        std::vector<std::pair<long, int>> keyed(pb.size());
        for (std::size_t j = 0; j < pb.size(); ++j) {
          const auto [cx, cy] = cell_of(pb[j]);
          keyed[j] = {static_cast<long>(cy) * nx + cx, static_cast<int>(j)};
        }
        std::sort(keyed.begin(), keyed.end());
        for (std::size_t i = 0; i < pa.size(); ++i) {
          const auto [cx, cy] = cell_of(pa[i]);
          for (int oy = -1; oy <= 1; ++oy)
            for (int ox = -1; ox <= 1; ++ox) {
              const int x = cx + ox, y = cy + oy;
              if (x < 0 || y < 0 || x >= nx || y >= ny)
                continue;
              const long key = static_cast<long>(y) * nx + x;
              auto it = std::lower_bound(keyed.begin(), keyed.end(), std::pair<long, int>{key, -1});
              for (; it != keyed.end() && it->first == key; ++it)
                if (norm2(pa[i] - pb[static_cast<std::size_t>(it->second)]) <= rb2)
                  pairs.emplace_back(static_cast<int>(i), it->second);
            }
        }
        std::sort(pairs.begin(), pairs.end());
      }
      if (!pairs.empty()) {
        std::shuffle(pairs.begin(), pairs.end(), rng);
        const double p = -std::expm1(-bi->kernel.lambda * h);
        used_a.assign(pa.size(), 0);
        used_b.assign(pb.size(), 0);
        bool any = false;
        std::vector<Vec2> born;
        for (const auto &[i, j] : pairs) {
          if (used_a[static_cast<std::size_t>(i)] || used_b[static_cast<std::size_t>(j)])
            continue;
          if (uniform01(rng) >= p)
            continue;
          used_a[static_cast<std::size_t>(i)] = 1;
          used_b[static_cast<std::size_t>(j)] = 1;
          any = true;
          if (bi->c >= 0)
            born.push_back(gamma * pa[static_cast<std::size_t>(i)] +
                           (1.0 - gamma) * pb[static_cast<std::size_t>(j)]);
        }
        if (any) {
          auto compact = [](std::vector<Vec2> &v, const std::vector<char> &used) {
            std::size_t keep = 0;
            for (std::size_t q = 0; q < v.size(); ++q)
              if (!used[q])
                v[keep++] = v[q];
            v.resize(keep);
          };
          compact(pa, used_a);
          compact(pb, used_b);
          if (bi->c >= 0) {
            auto &cs = st.positions[static_cast<std::size_t>(bi->c)];
            for (const Vec2 &z : born)
              cs.push_back(reflect(z));
          }
          if (!std::isfinite(res.first_association))
            res.first_association = static_cast<double>(u + m) * dt;
        }
      }
    }
    // Unbinding of complexes present at the start of the step; complexes
    // born above were appended after them.
    std::size_t n_old_c = 0;
    if (bi && bi->c >= 0) {
      auto &cs = st.positions[static_cast<std::size_t>(bi->c)];
      n_old_c = std::min(cs.size(), c_start.size());
      if (unbinding_ && n_old_c > 0) {
        std::vector<Vec2> old(cs.begin(), cs.begin() + static_cast<long>(n_old_c));
        std::vector<Vec2> rest(cs.begin() + static_cast<long>(n_old_c), cs.end());
        cs.clear();
        const double p_bound = -std::expm1(-rate_bound_ * h);
        for (std::size_t q = 0; q < old.size(); ++q) {
          bool fire = false;
          if (uniform01(rng) < p_bound) {
            const double k = unbinding_rate(c_start[q]);
            if (k > rate_bound_)
              throw NumericsError("unbinding rate exceeds its thinning bound");
            fire = detailed_balance_ ? uniform01(rng) * p_bound < -std::expm1(-k * h) : true;
          }
          if (fire) {
            const auto [x, y] = unbinding_->sample(old[q], rng);
            st.positions[static_cast<std::size_t>(bi->a)].push_back(x);
            st.positions[static_cast<std::size_t>(bi->b)].push_back(y);
          } else {
            cs.push_back(old[q]);
          }
        }
        cs.insert(cs.end(), rest.begin(), rest.end());
      }
    }

    u += m;
    ++res.steps;
  }
  res.dt_units = u - u0;
  res.final_state = std::move(st);
  return res;
}

BDEnsembleResult run_bd_ensemble(const BDSimulator &sim, const std::vector<BDInitial> &initial,
                                 std::size_t n, std::uint64_t master_seed, double t_end,
                                 const EnsembleOutputs &outputs) {
  BDEnsembleResult res;
  res.steps.assign(n, 0);
  if (outputs.binding_times)
    res.binding_times.assign(n, std::numeric_limits<double>::infinity());
  if (!outputs.t_grid.empty())
    res.totals.assign(n, {});
  const int ns = static_cast<int>(sim.config().species.size());
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(worker_count()), std::max<std::size_t>(n, 1));
  const std::size_t block = (n + workers - 1) / workers;
  parallel_for(workers, [&](std::size_t w) {
    const std::size_t lo = w * block, hi = std::min(n, lo + block);
    for (std::size_t r = lo; r < hi; ++r) {
      const std::uint64_t s = split_seed(master_seed, r);
      Rng init_rng(s);
      BDState st = sim.sample_initial(initial, init_rng);
      BDRunOptions opts;
      opts.t_end = t_end;
      opts.sample_times = outputs.t_grid;
      opts.stop_on_association = outputs.binding_times && outputs.t_grid.empty();
      if (!res.totals.empty()) {
        res.totals[r].assign(outputs.t_grid.size(), std::vector<int>(static_cast<std::size_t>(ns), 0));
        opts.observer = [&](std::size_t k, const BDState &state) {
          for (int sp = 0; sp < ns; ++sp)
            res.totals[r][k][static_cast<std::size_t>(sp)] = state.count(sp);
        };
      }
      const BDResult out = sim.run(std::move(st), splitmix64(s), opts);
      res.steps[r] = out.steps;
      if (outputs.binding_times)
        res.binding_times[r] = out.first_association;
    }
  });
  return res;
}

} // namespace crddme
