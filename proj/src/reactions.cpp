#include "crddme/reactions.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "crddme/errors.hpp"
#include "crddme/parallel.hpp"
#include "crddme/quadrature.hpp"

namespace crddme {

void DoiKernel::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw ConfigError("lambda must be non-negative", "kernel.lambda");
  if (!(r_b > 0.0) || !std::isfinite(r_b))
    throw ConfigError("r_b must be positive", "kernel.r_b");
  if (!(gamma >= 0.0 && gamma <= 1.0))
    throw ConfigError("gamma must lie in [0, 1]", "kernel.gamma");
}

int AssociationTable::find(int i, int j) const {
  auto it = std::lower_bound(pairs.begin(), pairs.end(), std::pair{i, j},
                             [](const AssociationPair &p, std::pair<int, int> key) {
                               return std::pair{p.i, p.j} < key;
                             });
  if (it == pairs.end() || it->i != i || it->j != j)
    return -1;
  return static_cast<int>(it - pairs.begin());
}

double AssociationTable::rate(int i, int j) const {
  const int p = find(i, j);
  return p < 0 ? 0.0 : pairs[static_cast<std::size_t>(p)].rate;
}

namespace {

// Uniform sampling of a dual polygon through its fan decomposition: the first
// coordinate picks the sub-triangle (area weighted) and is then rescaled.
class CellSampler {
public:
  explicit CellSampler(const DualCells &duals) : duals_(&duals) {
    cdf_.resize(duals.volumes.size());
    for (std::size_t i = 0; i < cdf_.size(); ++i) {
      double acc = 0.0;
      for (const auto &t : duals.sample_triangles[i]) {
        acc += std::abs(signed_area(t[0], t[1], t[2]));
        cdf_[i].push_back(acc);
      }
      for (double &c : cdf_[i])
        c /= acc;
      cdf_[i].back() = 1.0;
    }
  }

  Vec2 operator()(int cell, double u, double v) const {
    const auto &c = cdf_[static_cast<std::size_t>(cell)];
    const auto k = static_cast<std::size_t>(std::upper_bound(c.begin(), c.end(), u) - c.begin());
    const std::size_t kk = std::min(k, c.size() - 1);
    const double lo = kk == 0 ? 0.0 : c[kk - 1];
    const double uu = std::clamp((u - lo) / (c[kk] - lo), 0.0, 1.0);
    const auto &t = duals_->sample_triangles[static_cast<std::size_t>(cell)][kk];
    return uniform_in_triangle(t[0], t[1], t[2], uu, v);
  }

private:
  const DualCells *duals_;
  std::vector<std::vector<double>> cdf_;
};

// Shifted 4D Halton point (bases 2, 3, 5, 7).
struct Halton4 {
  double shift[4];

  Halton4(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    std::uint64_t h = splitmix64(seed ^ splitmix64(a * 0x100000001b3ULL + b));
    for (double &s : shift) {
      h = splitmix64(h);
      s = static_cast<double>(h >> 11) * 0x1.0p-53;
    }
  }

  void point(std::uint64_t index, double u[4]) const {
    static constexpr unsigned bases[4] = {2, 3, 5, 7};
    for (int d = 0; d < 4; ++d) {
      const double x = radical_inverse(index, bases[d]) + shift[d];
      u[d] = x >= 1.0 ? x - 1.0 : x;
    }
  }
};

struct Counts {
  std::vector<std::pair<int, long>> by_k;

  void add(int k) {
    for (auto &e : by_k)
      if (e.first == k) {
        ++e.second;
        return;
      }
    by_k.emplace_back(k, 1);
  }
};

struct PairAccum {
  int j = 0;
  double scale = 0.0; // rate per counted sample
  Counts forward;     // A in V_i, B in V_j
  Counts mirrored;    // A in V_j, B in V_i
};

// Candidate partners j >= i with |x_i - x_j| <= r_b + radius_i + radius_j.
std::vector<std::vector<int>> candidate_partners(const Mesh &mesh, const DualCells &duals,
                                                 double r_b) {
  const int n = mesh.num_nodes();
  const double rmax = *std::max_element(duals.radius.begin(), duals.radius.end());
  const double cell = r_b + 2.0 * rmax;
  Vec2 lo = mesh.node(0), hi = lo;
  for (const Vec2 &p : mesh.nodes()) {
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
  }
  const int nx = static_cast<int>((hi.x - lo.x) / cell) + 1;
  const int ny = static_cast<int>((hi.y - lo.y) / cell) + 1;
  std::vector<std::vector<int>> grid(static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny));
  auto bin = [&](Vec2 p) {
    return std::pair{std::min(nx - 1, static_cast<int>((p.x - lo.x) / cell)),
                     std::min(ny - 1, static_cast<int>((p.y - lo.y) / cell))};
  };
  for (int i = 0; i < n; ++i) {
    auto [bx, by] = bin(mesh.node(i));
    grid[static_cast<std::size_t>(by * nx + bx)].push_back(i);
  }
  std::vector<std::vector<int>> cand(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    auto [bx, by] = bin(mesh.node(i));
    auto &out = cand[static_cast<std::size_t>(i)];
    for (int y = std::max(0, by - 1); y <= std::min(ny - 1, by + 1); ++y)
      for (int x = std::max(0, bx - 1); x <= std::min(nx - 1, bx + 1); ++x)
        for (int j : grid[static_cast<std::size_t>(y * nx + x)]) {
          if (j < i)
            continue;
          const double reach = r_b + duals.radius[static_cast<std::size_t>(i)] +
                               duals.radius[static_cast<std::size_t>(j)];
          if (distance(mesh.node(i), mesh.node(j)) <= reach)
            out.push_back(j);
        }
    std::sort(out.begin(), out.end());
  }
  return cand;
}

PairAccum &accum_for(std::vector<PairAccum> &acc, int j) {
  for (auto &a : acc)
    if (a.j == j)
      return a;
  acc.emplace_back();
  acc.back().j = j;
  return acc.back();
}

} // namespace

AssociationTable tabulate_association(const Mesh &mesh, const DualCells &duals,
                                      const DoiKernel &kernel, const TabulationOptions &opts,
                                      std::vector<std::string> *warnings) {
  kernel.validate();
  if (opts.samples_per_pair < 1)
    throw ConfigError("samples_per_pair must be positive", "tabulation.samples_per_pair");
  const int n = mesh.num_nodes();
  if (duals.size() != n)
    throw std::invalid_argument("dual cells do not match the mesh");

  const double disk = std::numbers::pi * kernel.r_b * kernel.r_b;
  bool product = opts.method == TabulationOptions::Method::product;
  if (opts.method == TabulationOptions::Method::automatic) {
    std::vector<double> v = duals.volumes;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2), v.end());
    product = disk >= v[v.size() / 2];
  }

  const auto cand = candidate_partners(mesh, duals, kernel.r_b);
  const CellSampler sample_cell(duals);
  const PointLocator locator(mesh);
  const double g = kernel.gamma;
  const auto spp = static_cast<std::uint64_t>(opts.samples_per_pair);

  std::vector<std::vector<PairAccum>> per_cell(static_cast<std::size_t>(n));
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t ci) {
    const int i = static_cast<int>(ci);
    auto &acc = per_cell[ci];
    const auto &partners = cand[ci];
    double u[4];
    if (product) {
      for (int j : partners) {
        PairAccum &a = accum_for(acc, j);
        a.scale = kernel.lambda / static_cast<double>(spp);
        const Halton4 seq(opts.seed, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(j));
        for (std::uint64_t s = 1; s <= spp; ++s) {
          seq.point(s, u);
          const Vec2 x = sample_cell(i, u[0], u[1]);
          const Vec2 y = sample_cell(j, u[2], u[3]);
          if (distance(x, y) > kernel.r_b)
            continue;
          a.forward.add(locator.locate_cell_or_nearest(g * x + (1.0 - g) * y));
          if (j != i)
            a.mirrored.add(locator.locate_cell_or_nearest(g * y + (1.0 - g) * x));
        }
      }
    } else {
      const std::uint64_t total = spp * partners.size();
      const Halton4 seq(opts.seed, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(i));
      for (std::uint64_t s = 1; s <= total; ++s) {
        seq.point(s, u);
        const Vec2 x = sample_cell(i, u[0], u[1]);
        const double r = kernel.r_b * std::sqrt(u[2]);
        const double th = 2.0 * std::numbers::pi * u[3];
        const Vec2 y = x + Vec2{r * std::cos(th), r * std::sin(th)};
        const int j = locator.locate_cell(y);
        if (j < i) // outside the domain, or counted in the pass of cell j
          continue;
        PairAccum &a = accum_for(acc, j);
        a.forward.add(locator.locate_cell_or_nearest(g * x + (1.0 - g) * y));
        if (j != i)
          a.mirrored.add(locator.locate_cell_or_nearest(g * y + (1.0 - g) * x));
      }
      for (PairAccum &a : acc)
        a.scale = kernel.lambda * disk /
                  (static_cast<double>(total) * duals.volumes[static_cast<std::size_t>(a.j)]);
    }
  });

  struct Raw {
    int i, j;
    double scale;
    const Counts *counts;
  };
  std::vector<Raw> raw;
  for (int i = 0; i < n; ++i)
    for (const PairAccum &a : per_cell[static_cast<std::size_t>(i)]) {
      if (!a.forward.by_k.empty())
        raw.push_back({i, a.j, a.scale, &a.forward});
      if (a.j != i && !a.mirrored.by_k.empty())
        raw.push_back({a.j, i, a.scale, &a.mirrored});
    }
  std::sort(raw.begin(), raw.end(), [](const Raw &a, const Raw &b) {
    return std::pair{a.i, a.j} < std::pair{b.i, b.j};
  });

  AssociationTable table;
  table.n_voxels = n;
  table.pairs.reserve(raw.size());
  for (const Raw &r : raw) {
    auto counts = r.counts->by_k;
    std::sort(counts.begin(), counts.end());
    AssociationPair p{r.i, r.j, 0.0, static_cast<int>(table.placements.size()), 0};
    for (const auto &[k, c] : counts) {
      const double rate = r.scale * static_cast<double>(c);
      if (rate <= 0.0)
        continue;
      table.placements.push_back({k, rate});
      p.rate += rate;
    }
    p.end = static_cast<int>(table.placements.size());
    if (p.end > p.begin)
      table.pairs.push_back(p);
  }
  if (table.pairs.empty() && warnings)
    warnings->push_back("association table is empty: no sampled pair within r_b = " +
                        std::to_string(kernel.r_b) + " (or lambda = 0)");
  return table;
}

DissociationTable tabulate_dissociation(const AssociationTable &assoc,
                                        const std::vector<double> &volumes,
                                        const std::vector<double> &phi_a,
                                        const std::vector<double> &phi_b,
                                        const std::vector<double> &phi_c,
                                        const DissociationMode &mode) {
  const int n = assoc.n_voxels;
  const auto sz = static_cast<std::size_t>(n);
  if (volumes.size() != sz || phi_a.size() != sz || phi_b.size() != sz || phi_c.size() != sz)
    throw std::invalid_argument("dissociation inputs differ in size from the association table");
  const GibbsBoltzmann ga = discrete_gibbs_boltzmann(volumes, phi_a);
  const GibbsBoltzmann gb = discrete_gibbs_boltzmann(volumes, phi_b);
  const GibbsBoltzmann gc = discrete_gibbs_boltzmann(volumes, phi_c);

  // Bucket (pair, placement) by target voxel k, keeping pair order.
  std::vector<int> count(sz + 1, 0);
  for (const PlacedRate &pr : assoc.placements)
    ++count[static_cast<std::size_t>(pr.k) + 1];
  DissociationTable t;
  t.n_voxels = n;
  t.begin.assign(sz + 1, 0);
  for (std::size_t k = 0; k < sz; ++k)
    t.begin[k + 1] = t.begin[k] + count[k + 1];
  t.entries.resize(assoc.placements.size());
  std::vector<double> log_w(assoc.placements.size());
  std::vector<int> fill(t.begin.begin(), t.begin.end() - 1);
  for (const AssociationPair &p : assoc.pairs)
    for (int q = p.begin; q < p.end; ++q) {
      const PlacedRate &pr = assoc.placements[static_cast<std::size_t>(q)];
      const auto slot = static_cast<std::size_t>(fill[static_cast<std::size_t>(pr.k)]++);
      t.entries[slot] = {p.i, p.j, pr.rate};
      log_w[slot] = ga.log_p[static_cast<std::size_t>(p.i)] +
                    gb.log_p[static_cast<std::size_t>(p.j)] + std::log(pr.rate);
    }

  t.total.assign(sz, 0.0);
  if (const auto *db = std::get_if<DetailedBalanceMode>(&mode)) {
    if (!(db->k_d > 0.0))
      throw ConfigError("K_d must be positive", "reaction.k_d");
    for (std::size_t k = 0; k < sz; ++k)
      for (int e = t.begin[k]; e < t.begin[k + 1]; ++e) {
        DissociationEntry &en = t.entries[static_cast<std::size_t>(e)];
        en.rate = db->k_d *
                  std::exp(ga.log_p[static_cast<std::size_t>(en.i)] +
                           gb.log_p[static_cast<std::size_t>(en.j)] - gc.log_p[k]) *
                  en.rate;
        t.total[k] += en.rate;
      }
    return t;
  }

  const double mu = std::get<FixedRateMode>(mode).mu;
  if (!(mu > 0.0))
    throw ConfigError("mu must be positive", "reaction.mu");
  std::vector<DissociationEntry> entries;
  std::vector<int> begin(sz + 1, 0);
  for (std::size_t k = 0; k < sz; ++k) {
    const int b = t.begin[k], e = t.begin[k + 1];
    if (b == e) {
      entries.push_back({static_cast<int>(k), static_cast<int>(k), mu});
    } else {
      double m = -std::numeric_limits<double>::infinity();
      for (int q = b; q < e; ++q)
        m = std::max(m, log_w[static_cast<std::size_t>(q)]);
      double sum = 0.0;
      for (int q = b; q < e; ++q)
        sum += std::exp(log_w[static_cast<std::size_t>(q)] - m);
      for (int q = b; q < e; ++q) {
        const DissociationEntry &en = t.entries[static_cast<std::size_t>(q)];
        entries.push_back({en.i, en.j, mu * std::exp(log_w[static_cast<std::size_t>(q)] - m) / sum});
      }
    }
    begin[k + 1] = static_cast<int>(entries.size());
    for (int q = begin[k]; q < begin[k + 1]; ++q)
      t.total[k] += entries[static_cast<std::size_t>(q)].rate;
  }
  t.entries = std::move(entries);
  t.begin = std::move(begin);
  return t;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

void mix(std::uint64_t &h, const void *data, std::size_t n) {
  const auto *p = static_cast<const unsigned char *>(data);
  for (std::size_t k = 0; k < n; ++k) {
    h ^= p[k];
    h *= 1099511628211ULL;
  }
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const char *method_name(TabulationOptions::Method m) {
  switch (m) {
  case TabulationOptions::Method::product:
    return "product";
  case TabulationOptions::Method::ball:
    return "ball";
  default:
    return "automatic";
  }
}

} // namespace

std::uint64_t ReactionTables::checksum() const {
  std::uint64_t h = 14695981039346656037ULL;
  for (const AssociationPair &p : association.pairs) {
    mix(h, &p.i, sizeof p.i);
    mix(h, &p.j, sizeof p.j);
    for (int q = p.begin; q < p.end; ++q) {
      const PlacedRate &pr = association.placements[static_cast<std::size_t>(q)];
      mix(h, &pr.k, sizeof pr.k);
      mix(h, &pr.rate, sizeof pr.rate);
    }
  }
  for (std::size_t k = 0; k + 1 < dissociation.begin.size(); ++k)
    for (int e = dissociation.begin[k]; e < dissociation.begin[k + 1]; ++e) {
      const DissociationEntry &en = dissociation.entries[static_cast<std::size_t>(e)];
      mix(h, &k, sizeof k);
      mix(h, &en.i, sizeof en.i);
      mix(h, &en.j, sizeof en.j);
      mix(h, &en.rate, sizeof en.rate);
    }
  return h;
}

void write_tables(std::ostream &out, const ReactionTables &t, std::uint64_t mesh_hash) {
  nlohmann::json header;
  header["format"] = "crddme-reaction-tables";
  header["version"] = 1;
  header["mesh_hash"] = hex64(mesh_hash);
  header["n_voxels"] = t.association.n_voxels;
  header["kernel"] = {{"lambda", t.kernel.lambda}, {"r_b", t.kernel.r_b}, {"gamma", t.kernel.gamma}};
  if (const auto *db = std::get_if<DetailedBalanceMode>(&t.mode))
    header["dissociation"] = {{"mode", "detailed_balance"}, {"k_d", db->k_d}};
  else
    header["dissociation"] = {{"mode", "fixed_rate"}, {"mu", std::get<FixedRateMode>(t.mode).mu}};
  header["seed"] = t.options.seed;
  header["samples_per_pair"] = t.options.samples_per_pair;
  header["method"] = method_name(t.options.method);
  header["checksum"] = hex64(t.checksum());
  out << header.dump() << '\n';
  for (const AssociationPair &p : t.association.pairs)
    for (int q = p.begin; q < p.end; ++q) {
      const PlacedRate &pr = t.association.placements[static_cast<std::size_t>(q)];
      out << "A " << p.i << ' ' << p.j << ' ' << pr.k << ' ' << fmt17(pr.rate) << '\n';
    }
  const auto &d = t.dissociation;
  for (std::size_t k = 0; k + 1 < d.begin.size(); ++k)
    for (int e = d.begin[k]; e < d.begin[k + 1]; ++e) {
      const DissociationEntry &en = d.entries[static_cast<std::size_t>(e)];
      out << "D " << en.i << ' ' << en.j << ' ' << k << ' ' << fmt17(en.rate) << '\n';
    }
}

ReactionTables read_tables(std::istream &in, std::optional<std::uint64_t> expected_mesh_hash) {
  std::string line;
  if (!std::getline(in, line))
    throw ConfigError("empty reaction table file");
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError(std::string("bad reaction table header: ") + e.what());
  }
  if (h.value("format", "") != "crddme-reaction-tables")
    throw ConfigError("not a reaction table file");
  if (expected_mesh_hash && h.at("mesh_hash").get<std::string>() != hex64(*expected_mesh_hash))
    throw ConfigError("reaction tables were built for a different mesh (hash " +
                      h.at("mesh_hash").get<std::string>() + ", expected " +
                      hex64(*expected_mesh_hash) + ")");
  ReactionTables t;
  t.kernel = {h.at("kernel").at("lambda").get<double>(), h.at("kernel").at("r_b").get<double>(),
              h.at("kernel").at("gamma").get<double>()};
  const auto &dis = h.at("dissociation");
  if (dis.at("mode") == "detailed_balance")
    t.mode = DetailedBalanceMode{dis.at("k_d").get<double>()};
  else
    t.mode = FixedRateMode{dis.at("mu").get<double>()};
  t.options.seed = h.at("seed").get<std::uint64_t>();
  t.options.samples_per_pair = h.at("samples_per_pair").get<int>();
  const std::string method = h.at("method").get<std::string>();
  t.options.method = method == "product" ? TabulationOptions::Method::product
                     : method == "ball" ? TabulationOptions::Method::ball
                                        : TabulationOptions::Method::automatic;
  const int n = h.at("n_voxels").get<int>();
  t.association.n_voxels = n;
  t.dissociation.n_voxels = n;
  t.dissociation.begin.assign(static_cast<std::size_t>(n) + 1, 0);
  t.dissociation.total.assign(static_cast<std::size_t>(n), 0.0);

  int line_no = 1;
  int last_k = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty())
      continue;
    std::istringstream ls(line);
    char tag = 0;
    int i = 0, j = 0, k = 0;
    std::string rate_text;
    if (!(ls >> tag >> i >> j >> k >> rate_text) || i < 0 || j < 0 || k < 0 || i >= n ||
        j >= n || k >= n)
      throw ConfigError("malformed reaction table line " + std::to_string(line_no));
    const double rate = std::strtod(rate_text.c_str(), nullptr);
    if (tag == 'A') {
      auto &pairs = t.association.pairs;
      if (pairs.empty() || pairs.back().i != i || pairs.back().j != j)
        pairs.push_back({i, j, 0.0, static_cast<int>(t.association.placements.size()), 0});
      t.association.placements.push_back({k, rate});
      pairs.back().rate += rate;
      pairs.back().end = static_cast<int>(t.association.placements.size());
    } else if (tag == 'D') {
      if (k < last_k)
        throw ConfigError("dissociation entries out of order at line " + std::to_string(line_no));
      last_k = k;
      t.dissociation.entries.push_back({i, j, rate});
      ++t.dissociation.begin[static_cast<std::size_t>(k) + 1];
      t.dissociation.total[static_cast<std::size_t>(k)] += rate;
    } else {
      throw ConfigError("unknown tag in reaction table line " + std::to_string(line_no));
    }
  }
  for (std::size_t k = 0; k < static_cast<std::size_t>(n); ++k)
    t.dissociation.begin[k + 1] += t.dissociation.begin[k];
  if (hex64(t.checksum()) != h.at("checksum").get<std::string>())
    throw ConfigError("reaction table checksum mismatch");
  return t;
}

// ---------------------------------------------------------------------------
// Continuous unbinding

ContinuousUnbinding::ContinuousUnbinding(DoiKernel kernel, PotentialField phi_a,
                                         PotentialField phi_b, PotentialField phi_c,
                                         double log_z_a, double log_z_b, double log_z_c,
                                         double k_d, Options opts)
    : kernel_(kernel), phi_a_(std::move(phi_a)), phi_b_(std::move(phi_b)),
      phi_c_(std::move(phi_c)),
      prefactor_(k_d * kernel.lambda * std::exp(log_z_c - log_z_a - log_z_b)),
      inside_(std::move(opts.inside)) {
  kernel_.validate();
  if (opts.radial_points < 1 || opts.angular_points < 1)
    throw ConfigError("unbinding quadrature needs at least one point per direction");
  const auto radial = gauss_legendre01(opts.radial_points);
  const double dth = 2.0 * std::numbers::pi / opts.angular_points;
  for (const LinePoint &q : radial) {
    const double r = kernel_.r_b * q.s;
    const double w = kernel_.r_b * kernel_.r_b * q.s * q.w * dth;
    for (int m = 0; m < opts.angular_points; ++m) {
      const double th = (m + 0.5) * dth;
      nodes_.push_back({{r * std::cos(th), r * std::sin(th)}, w});
    }
  }
}

double ContinuousUnbinding::integrand(Vec2 z, Vec2 w) const {
  const Vec2 x = z + (1.0 - kernel_.gamma) * w;
  const Vec2 y = z - kernel_.gamma * w;
  if (inside_ && (!inside_(x) || !inside_(y)))
    return 0.0;
  return std::exp(phi_c_.value(z) - phi_a_.value(x) - phi_b_.value(y));
}

double ContinuousUnbinding::rate(Vec2 z) const {
  double s = 0.0;
  for (const Node &n : nodes_)
    s += n.weight * integrand(z, n.w);
  if (!std::isfinite(s))
    throw NumericsError("non-finite unbinding rate");
  return prefactor_ * s;
}

std::pair<Vec2, Vec2> ContinuousUnbinding::sample(Vec2 z, Rng &rng) const {
  double envelope = integrand(z, {});
  for (const Node &n : nodes_)
    envelope = std::max(envelope, integrand(z, n.w));
  if (!std::isfinite(envelope) || !(envelope > 0.0))
    throw NumericsError("unbinding sampler has no valid envelope at (" + std::to_string(z.x) +
                        "," + std::to_string(z.y) + ")");
  envelope *= 1.05;
  for (int tries = 0; tries < 1000000; ++tries) {
    const double r = kernel_.r_b * std::sqrt(uniform01(rng));
    const double th = 2.0 * std::numbers::pi * uniform01(rng);
    const Vec2 w{r * std::cos(th), r * std::sin(th)};
    const double f = integrand(z, w);
    if (f > envelope)
      envelope = 1.05 * f;
    if (uniform01(rng) * envelope < f)
      return {z + (1.0 - kernel_.gamma) * w, z - kernel_.gamma * w};
  }
  throw NumericsError("unbinding sampler failed to accept a proposal");
}

} // namespace crddme
