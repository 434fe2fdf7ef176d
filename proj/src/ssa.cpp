#include "crddme/ssa.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "crddme/errors.hpp"
#include "crddme/parallel.hpp"

namespace crddme {

int ReactionModel::species_index(const std::string &name) const {
  for (std::size_t s = 0; s < species.size(); ++s)
    if (species[s] == name)
      return static_cast<int>(s);
  throw ConfigError("unknown species '" + name + "'");
}

void ReactionModel::validate() const {
  if (species.empty() || species.size() != hops.size())
    throw ConfigError("need one rate operator per species");
  const int n = n_voxels();
  for (const RateOperator &h : hops)
    if (h.size() != n)
      throw ConfigError("rate operators are built on different meshes");
  const int ns = n_species();
  auto check_species = [&](int s, const char *what) {
    if (s < 0 || s >= ns)
      throw ConfigError(std::string("species index out of range in ") + what);
  };
  if (bimolecular) {
    check_species(bimolecular->a, "bimolecular.a");
    check_species(bimolecular->b, "bimolecular.b");
    if (bimolecular->a == bimolecular->b)
      throw ConfigError("A + A reactions are not supported");
    if (bimolecular->c >= 0)
      check_species(bimolecular->c, "bimolecular.c");
    if (!bimolecular->association || bimolecular->association->n_voxels != n)
      throw ConfigError("association table does not match the mesh");
    if (bimolecular->dissociation) {
      if (bimolecular->c < 0)
        throw ConfigError("dissociation requires a product species");
      if (bimolecular->dissociation->n_voxels != n)
        throw ConfigError("dissociation table does not match the mesh");
    }
  }
  for (const LinearReaction &r : linear) {
    check_species(r.from, "linear.from");
    check_species(r.to, "linear.to");
    if (!(r.rate >= 0.0))
      throw ConfigError("linear reaction rate must be non-negative");
  }
}

int SystemState::total(int s) const {
  long sum = 0;
  for (int c : counts[static_cast<std::size_t>(s)])
    sum += c;
  return static_cast<int>(sum);
}

// ---------------------------------------------------------------------------
// Channel table

void ChannelTable::Alias::add_group(const std::vector<double> &w) {
  // Vose's alias method.
  const std::size_t base = prob.size();
  if (begin.empty())
    begin.push_back(0);
  const std::size_t n = w.size();
  prob.resize(base + n);
  alias.resize(base + n);
  double sum = 0.0;
  for (double v : w)
    sum += v;
  std::vector<double> scaled(n);
  std::vector<std::size_t> small, large;
  for (std::size_t k = 0; k < n; ++k) {
    scaled[k] = sum > 0.0 ? w[k] * static_cast<double>(n) / sum : 1.0;
    (scaled[k] < 1.0 ? small : large).push_back(k);
  }
  while (!small.empty() && !large.empty()) {
    const std::size_t s = small.back(), l = large.back();
    small.pop_back();
    prob[base + s] = scaled[s];
    alias[base + s] = static_cast<int>(l);
    scaled[l] -= 1.0 - scaled[s];
    if (scaled[l] < 1.0) {
      large.pop_back();
      small.push_back(l);
    }
  }
  for (std::size_t k : large) {
    prob[base + k] = 1.0;
    alias[base + k] = static_cast<int>(k);
  }
  for (std::size_t k : small) {
    prob[base + k] = 1.0;
    alias[base + k] = static_cast<int>(k);
  }
  begin.push_back(static_cast<int>(prob.size()));
}

int ChannelTable::Alias::draw(int group, Rng &rng) const {
  const int b = begin[static_cast<std::size_t>(group)];
  const int n = begin[static_cast<std::size_t>(group) + 1] - b;
  const double u = uniform01(rng) * n;
  const int idx = std::min(static_cast<int>(u), n - 1);
  const double frac = u - idx;
  return frac < prob[static_cast<std::size_t>(b + idx)] ? idx
                                                         : alias[static_cast<std::size_t>(b + idx)];
}

ChannelTable::ChannelTable(std::shared_ptr<const ReactionModel> model) : model_(std::move(model)) {
  const ReactionModel &m = *model_;
  m.validate();
  const int n = m.n_voxels();
  const int ns = m.n_species();

  for (int s = 0; s < ns; ++s) {
    const SparseMatrix &l = m.hops[static_cast<std::size_t>(s)].matrix;
    for (int j = 0; j < n; ++j)
      for (SparseMatrix::InnerIterator it(l, j); it; ++it)
        if (it.row() != j && it.value() > 0.0)
          channels_.push_back({ChannelKind::hop, s, j, static_cast<int>(it.row()), it.value()});
  }
  if (m.bimolecular) {
    const auto &bi = *m.bimolecular;
    const AssociationTable &at = *bi.association;
    for (std::size_t p = 0; p < at.pairs.size(); ++p) {
      const AssociationPair &pr = at.pairs[p];
      std::vector<double> w;
      for (int q = pr.begin; q < pr.end; ++q)
        w.push_back(at.placements[static_cast<std::size_t>(q)].rate);
      assoc_alias_.add_group(w);
      if (pr.rate > 0.0)
        channels_.push_back({ChannelKind::association, bi.a, static_cast<int>(p), 0, pr.rate});
    }
    if (bi.dissociation) {
      const DissociationTable &dt = *bi.dissociation;
      for (int k = 0; k < n; ++k) {
        std::vector<double> w;
        for (int e = dt.begin[static_cast<std::size_t>(k)];
             e < dt.begin[static_cast<std::size_t>(k) + 1]; ++e)
          w.push_back(dt.entries[static_cast<std::size_t>(e)].rate);
        dissoc_alias_.add_group(w);
        if (dt.total[static_cast<std::size_t>(k)] > 0.0)
          channels_.push_back(
              {ChannelKind::dissociation, bi.c, k, 0, dt.total[static_cast<std::size_t>(k)]});
      }
    }
  }
  for (std::size_t r = 0; r < m.linear.size(); ++r) {
    const LinearReaction &lr = m.linear[r];
    if (lr.rate > 0.0)
      for (int v = 0; v < n; ++v)
        channels_.push_back({ChannelKind::linear, lr.from, v, static_cast<int>(r), lr.rate});
  }

  // Reader lists in CSR form, keyed by s * n + v.
  std::vector<std::vector<int>> readers(static_cast<std::size_t>(ns) * static_cast<std::size_t>(n));
  auto key = [n](int s, int v) { return static_cast<std::size_t>(s) * static_cast<std::size_t>(n) + static_cast<std::size_t>(v); };
  for (std::size_t c = 0; c < channels_.size(); ++c) {
    const Channel &ch = channels_[c];
    switch (ch.kind) {
    case ChannelKind::hop:
    case ChannelKind::linear:
    case ChannelKind::dissociation:
      readers[key(ch.species, ch.from)].push_back(static_cast<int>(c));
      break;
    case ChannelKind::association: {
      const AssociationPair &pr = m.bimolecular->association->pairs[static_cast<std::size_t>(ch.from)];
      readers[key(m.bimolecular->a, pr.i)].push_back(static_cast<int>(c));
      readers[key(m.bimolecular->b, pr.j)].push_back(static_cast<int>(c));
      break;
    }
    }
  }
  reader_begin_.assign(readers.size() + 1, 0);
  for (std::size_t k = 0; k < readers.size(); ++k)
    reader_begin_[k + 1] = reader_begin_[k] + static_cast<int>(readers[k].size());
  reader_items_.reserve(static_cast<std::size_t>(reader_begin_.back()));
  for (const auto &r : readers)
    reader_items_.insert(reader_items_.end(), r.begin(), r.end());
}

std::span<const int> ChannelTable::readers(int s, int v) const {
  const auto k = static_cast<std::size_t>(s) * static_cast<std::size_t>(model_->n_voxels()) +
                 static_cast<std::size_t>(v);
  const auto b = static_cast<std::size_t>(reader_begin_[k]);
  const auto e = static_cast<std::size_t>(reader_begin_[k + 1]);
  return {reader_items_.data() + b, e - b};
}

double ChannelTable::propensity(int c, const SystemState &state) const {
  const Channel &ch = channels_[static_cast<std::size_t>(c)];
  const auto &cnt = state.counts;
  switch (ch.kind) {
  case ChannelKind::hop:
  case ChannelKind::linear:
  case ChannelKind::dissociation:
    return ch.rate * cnt[static_cast<std::size_t>(ch.species)][static_cast<std::size_t>(ch.from)];
  case ChannelKind::association: {
    const auto &bi = *model_->bimolecular;
    const AssociationPair &pr = bi.association->pairs[static_cast<std::size_t>(ch.from)];
    const double na = cnt[static_cast<std::size_t>(bi.a)][static_cast<std::size_t>(pr.i)];
    const double nb = cnt[static_cast<std::size_t>(bi.b)][static_cast<std::size_t>(pr.j)];
    return ch.rate * na * nb;
  }
  }
  return 0.0;
}

int ChannelTable::draw_association_placement(int pair, Rng &rng) const {
  const AssociationTable &at = *model_->bimolecular->association;
  const AssociationPair &pr = at.pairs[static_cast<std::size_t>(pair)];
  const int q = assoc_alias_.draw(pair, rng);
  return at.placements[static_cast<std::size_t>(pr.begin + q)].k;
}

std::pair<int, int> ChannelTable::draw_dissociation_placement(int k, Rng &rng) const {
  const DissociationTable &dt = *model_->bimolecular->dissociation;
  const int q = dissoc_alias_.draw(k, rng);
  const DissociationEntry &e = dt.entries[static_cast<std::size_t>(dt.begin[static_cast<std::size_t>(k)] + q)];
  return {e.i, e.j};
}

// ---------------------------------------------------------------------------
// Event log

namespace {

void bump(std::vector<std::vector<int>> &counts, int s, int v, int delta) {
  int &c = counts[static_cast<std::size_t>(s)][static_cast<std::size_t>(v)];
  if (delta < 0 && c <= 0) {
    std::ostringstream os;
    os << "negative copy number for species " << s << " in voxel " << v;
    throw std::logic_error(os.str());
  }
  if (delta > 0 && c == std::numeric_limits<int>::max())
    throw NumericsError("copy number overflow");
  c += delta;
}

void apply_event(const ReactionModel &m, const Event &e, SystemState &st) {
  switch (e.kind) {
  case ChannelKind::hop:
    bump(st.counts, e.species, e.v0, -1);
    bump(st.counts, e.species, e.v1, +1);
    break;
  case ChannelKind::association:
    bump(st.counts, m.bimolecular->a, e.v0, -1);
    bump(st.counts, m.bimolecular->b, e.v1, -1);
    if (e.v2 >= 0)
      bump(st.counts, m.bimolecular->c, e.v2, +1);
    break;
  case ChannelKind::dissociation:
    bump(st.counts, m.bimolecular->c, e.v0, -1);
    bump(st.counts, m.bimolecular->a, e.v1, +1);
    bump(st.counts, m.bimolecular->b, e.v2, +1);
    break;
  case ChannelKind::linear:
    bump(st.counts, e.species, e.v0, -1);
    bump(st.counts, m.linear[static_cast<std::size_t>(e.v1)].to, e.v0, +1);
    break;
  }
  st.t = e.t;
}

} // namespace

SystemState EventLog::replay(const ReactionModel &model, SystemState state) const {
  for (const Event &e : events)
    apply_event(model, e, state);
  return state;
}

bool EventLog::replay_matches_snapshots(const ReactionModel &model, SystemState state) const {
  std::size_t e = 0;
  for (const SystemState &snap : snapshots) {
    while (e < events.size() && events[e].t <= snap.t)
      apply_event(model, events[e++], state);
    if (state.counts != snap.counts)
      return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Next Reaction Method

Simulator::Simulator(std::shared_ptr<const ChannelTable> table) : table_(std::move(table)) {
  const std::size_t n = table_->size();
  a_.assign(n, 0.0);
  tau_.assign(n, std::numeric_limits<double>::infinity());
  pos_.assign(n, -1);
  stamp_.assign(n, 0);
}

void Simulator::sift_up(std::size_t i) {
  const int c = heap_[i];
  while (i > 0) {
    const std::size_t parent = (i - 1) / 2;
    if (tau_[static_cast<std::size_t>(heap_[parent])] <= tau_[static_cast<std::size_t>(c)])
      break;
    heap_[i] = heap_[parent];
    pos_[static_cast<std::size_t>(heap_[i])] = static_cast<int>(i);
    i = parent;
  }
  heap_[i] = c;
  pos_[static_cast<std::size_t>(c)] = static_cast<int>(i);
}

void Simulator::sift_down(std::size_t i) {
  const int c = heap_[i];
  const std::size_t n = heap_.size();
  while (true) {
    std::size_t child = 2 * i + 1;
    if (child >= n)
      break;
    if (child + 1 < n && tau_[static_cast<std::size_t>(heap_[child + 1])] <
                             tau_[static_cast<std::size_t>(heap_[child])])
      ++child;
    if (tau_[static_cast<std::size_t>(heap_[child])] >= tau_[static_cast<std::size_t>(c)])
      break;
    heap_[i] = heap_[child];
    pos_[static_cast<std::size_t>(heap_[i])] = static_cast<int>(i);
    i = child;
  }
  heap_[i] = c;
  pos_[static_cast<std::size_t>(c)] = static_cast<int>(i);
}

void Simulator::heap_push(int c) {
  heap_.push_back(c);
  sift_up(heap_.size() - 1);
}

void Simulator::heap_remove(int c) {
  const auto i = static_cast<std::size_t>(pos_[static_cast<std::size_t>(c)]);
  pos_[static_cast<std::size_t>(c)] = -1;
  const int last = heap_.back();
  heap_.pop_back();
  if (i == heap_.size())
    return;
  heap_[i] = last;
  pos_[static_cast<std::size_t>(last)] = static_cast<int>(i);
  sift_up(i);
  sift_down(static_cast<std::size_t>(pos_[static_cast<std::size_t>(last)]));
}

void Simulator::heap_fix(int c) {
  const auto i = static_cast<std::size_t>(pos_[static_cast<std::size_t>(c)]);
  sift_up(i);
  sift_down(static_cast<std::size_t>(pos_[static_cast<std::size_t>(c)]));
}

void Simulator::set_propensity(int c, double a_new, double t, Rng &rng, bool fired) {
  const auto ci = static_cast<std::size_t>(c);
  const double a_old = a_[ci];
  if (!std::isfinite(a_new))
    throw NumericsError("propensity overflow in channel " + std::to_string(c));
  if (!fired && a_new == a_old)
    return;
  a_[ci] = a_new;
  if (a_new <= 0.0) {
    tau_[ci] = std::numeric_limits<double>::infinity();
    if (pos_[ci] >= 0)
      heap_remove(c);
    return;
  }
  if (fired || a_old <= 0.0)
    tau_[ci] = t - std::log(uniform01_open0(rng)) / a_new;
  else
    tau_[ci] = t + (a_old / a_new) * (tau_[ci] - t);
  if (pos_[ci] >= 0)
    heap_fix(c);
  else
    heap_push(c);
}

void Simulator::reset() {
  for (int c : heap_) {
    a_[static_cast<std::size_t>(c)] = 0.0;
    tau_[static_cast<std::size_t>(c)] = std::numeric_limits<double>::infinity();
    pos_[static_cast<std::size_t>(c)] = -1;
  }
  heap_.clear();
}

SimulationResult Simulator::run(const SystemState &initial, std::uint64_t seed,
                                const SimulationOptions &opts) {
  const ChannelTable &table = *table_;
  const ReactionModel &m = table.model();
  const int ns = m.n_species();
  const int nv = m.n_voxels();
  if (static_cast<int>(initial.counts.size()) != ns)
    throw ConfigError("initial state has the wrong number of species");
  for (const auto &c : initial.counts)
    if (static_cast<int>(c.size()) != nv)
      throw ConfigError("initial state has the wrong number of voxels");

  reset();
  Rng rng(seed);
  SimulationResult res;
  SystemState &st = res.final_state;
  st = initial;
  double t = st.t;

  auto next_epoch = [&] {
    if (++epoch_ == 0) {
      std::fill(stamp_.begin(), stamp_.end(), 0);
      epoch_ = 1;
    }
  };
  next_epoch();
  for (int s = 0; s < ns; ++s)
    for (int v = 0; v < nv; ++v)
      if (st.counts[static_cast<std::size_t>(s)][static_cast<std::size_t>(v)] > 0)
        for (int c : table.readers(s, v)) {
          if (stamp_[static_cast<std::size_t>(c)] == epoch_)
            continue;
          stamp_[static_cast<std::size_t>(c)] = epoch_;
          set_propensity(c, table.propensity(c, st), t, rng, true);
        }

  std::size_t si = 0;
  const auto &times = opts.sample_times;
  auto emit = [&](double at) {
    const double keep = st.t;
    st.t = at;
    if (opts.observer)
      opts.observer(si, st);
    if (opts.record_snapshots)
      res.log.snapshots.push_back(st);
    st.t = keep;
    ++si;
  };
  while (si < times.size() && times[si] < t)
    emit(times[si]);

  std::pair<int, int> changed[3];
  while (true) {
    const double next = heap_.empty() ? std::numeric_limits<double>::infinity()
                                      : tau_[static_cast<std::size_t>(heap_[0])];
    while (si < times.size() && times[si] < next && times[si] <= opts.t_end)
      emit(times[si]);
    if (next > opts.t_end || !std::isfinite(next)) {
      if (std::isfinite(opts.t_end))
        st.t = opts.t_end;
      break;
    }
    if (res.n_events >= opts.max_events)
      break;

    const int c = heap_[0];
    const Channel &ch = table.channels()[static_cast<std::size_t>(c)];
    t = next;
    Event ev{t, ch.kind, ch.species, 0, 0, 0};
    int n_changed = 0;
    switch (ch.kind) {
    case ChannelKind::hop:
      ev.v0 = ch.from;
      ev.v1 = ch.to;
      changed[n_changed++] = {ch.species, ch.from};
      changed[n_changed++] = {ch.species, ch.to};
      break;
    case ChannelKind::association: {
      const auto &bi = *m.bimolecular;
      const AssociationPair &pr = bi.association->pairs[static_cast<std::size_t>(ch.from)];
      ev.v0 = pr.i;
      ev.v1 = pr.j;
      ev.v2 = bi.c >= 0 ? table.draw_association_placement(ch.from, rng) : -1;
      changed[n_changed++] = {bi.a, pr.i};
      changed[n_changed++] = {bi.b, pr.j};
      if (bi.c >= 0)
        changed[n_changed++] = {bi.c, ev.v2};
      break;
    }
    case ChannelKind::dissociation: {
      const auto &bi = *m.bimolecular;
      const auto [i, j] = table.draw_dissociation_placement(ch.from, rng);
      ev.v0 = ch.from;
      ev.v1 = i;
      ev.v2 = j;
      changed[n_changed++] = {bi.c, ch.from};
      changed[n_changed++] = {bi.a, i};
      changed[n_changed++] = {bi.b, j};
      break;
    }
    case ChannelKind::linear:
      ev.v0 = ch.from;
      ev.v1 = ch.to;
      changed[n_changed++] = {ch.species, ch.from};
      changed[n_changed++] = {m.linear[static_cast<std::size_t>(ch.to)].to, ch.from};
      break;
    }
    apply_event(m, ev, st);
    ++res.n_events;
    if (opts.record_events)
      res.log.events.push_back(ev);

    next_epoch();
    stamp_[static_cast<std::size_t>(c)] = epoch_;
    set_propensity(c, table.propensity(c, st), t, rng, true);
    for (int k = 0; k < n_changed; ++k)
      for (int d : table.readers(changed[k].first, changed[k].second)) {
        if (stamp_[static_cast<std::size_t>(d)] == epoch_)
          continue;
        stamp_[static_cast<std::size_t>(d)] = epoch_;
        set_propensity(d, table.propensity(d, st), t, rng, false);
      }

    if (ch.kind == ChannelKind::association && !std::isfinite(res.first_association)) {
      res.first_association = t;
      if (opts.stop_on_association)
        break;
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// Initial conditions and ensembles

SystemState sample_initial_state(const ReactionModel &model, const std::vector<double> &volumes,
                                 const std::vector<InitialPlacement> &placements, Rng &rng) {
  const int nv = model.n_voxels();
  if (static_cast<int>(volumes.size()) != nv)
    throw ConfigError("volume list does not match the model");
  SystemState st;
  st.counts.assign(static_cast<std::size_t>(model.n_species()),
                   std::vector<int>(static_cast<std::size_t>(nv), 0));
  std::discrete_distribution<int> by_area(volumes.begin(), volumes.end());
  for (const InitialPlacement &p : placements) {
    if (p.species < 0 || p.species >= model.n_species())
      throw ConfigError("initial placement names an unknown species");
    if (p.count < 0)
      throw ConfigError("initial count must be non-negative");
    auto &cnt = st.counts[static_cast<std::size_t>(p.species)];
    switch (p.kind) {
    case InitialPlacement::Kind::uniform_by_area:
      if (p.voxels.empty()) {
        for (int k = 0; k < p.count; ++k)
          ++cnt[static_cast<std::size_t>(by_area(rng))];
      } else {
        std::vector<double> w;
        for (int v : p.voxels)
          w.push_back(volumes.at(static_cast<std::size_t>(v)));
        std::discrete_distribution<int> restricted(w.begin(), w.end());
        for (int k = 0; k < p.count; ++k)
          ++cnt[static_cast<std::size_t>(p.voxels[static_cast<std::size_t>(restricted(rng))])];
      }
      break;
    case InitialPlacement::Kind::per_voxel:
      if (p.voxels.empty())
        for (int &c : cnt)
          c += p.count;
      else
        for (int v : p.voxels)
          cnt.at(static_cast<std::size_t>(v)) += p.count;
      break;
    case InitialPlacement::Kind::at_voxel:
      cnt.at(static_cast<std::size_t>(p.voxel)) += p.count;
      break;
    }
  }
  return st;
}

EnsembleResult run_ensemble(std::shared_ptr<const ChannelTable> table,
                            const std::vector<double> &volumes,
                            const std::vector<InitialPlacement> &initial, std::size_t n,
                            std::uint64_t master_seed, double t_end,
                            const EnsembleOutputs &outputs) {
  EnsembleResult res;
  res.n_events.assign(n, 0);
  if (outputs.binding_times)
    res.binding_times.assign(n, std::numeric_limits<double>::infinity());
  if (!outputs.t_grid.empty())
    res.totals.assign(n, {});
  if (!outputs.snapshot_times.empty())
    res.snapshots.assign(n, {});

  // Merged observation schedule: (time, 0 = totals / 1 = snapshot, index).
  struct Obs {
    double t;
    int kind;
    std::size_t idx;
  };
  std::vector<Obs> obs;
  for (std::size_t k = 0; k < outputs.t_grid.size(); ++k)
    obs.push_back({outputs.t_grid[k], 0, k});
  for (std::size_t k = 0; k < outputs.snapshot_times.size(); ++k)
    obs.push_back({outputs.snapshot_times[k], 1, k});
  std::stable_sort(obs.begin(), obs.end(), [](const Obs &a, const Obs &b) { return a.t < b.t; });
  std::vector<double> times;
  for (const Obs &o : obs)
    times.push_back(o.t);

  const ReactionModel &model = table->model();
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(worker_count()), std::max<std::size_t>(n, 1));
  const std::size_t block = (n + workers - 1) / std::max<std::size_t>(workers, 1);
  parallel_for(workers, [&](std::size_t w) {
    Simulator sim(table);
    const std::size_t lo = w * block, hi = std::min(n, lo + block);
    for (std::size_t r = lo; r < hi; ++r) {
      const std::uint64_t s = split_seed(master_seed, r);
      Rng init_rng(s);
      const SystemState st0 = sample_initial_state(model, volumes, initial, init_rng);
      SimulationOptions opts;
      opts.t_end = t_end;
      opts.sample_times = times;
      opts.stop_on_association = outputs.binding_times && times.empty();
      if (!res.totals.empty())
        res.totals[r].assign(outputs.t_grid.size(), std::vector<int>(static_cast<std::size_t>(model.n_species()), 0));
      if (!res.snapshots.empty())
        res.snapshots[r].resize(outputs.snapshot_times.size());
      opts.observer = [&](std::size_t k, const SystemState &state) {
        const Obs &o = obs[k];
        if (o.kind == 0)
          for (int sp = 0; sp < model.n_species(); ++sp)
            res.totals[r][o.idx][static_cast<std::size_t>(sp)] = state.total(sp);
        else
          res.snapshots[r][o.idx] = state;
      };
      const SimulationResult out = sim.run(st0, splitmix64(s), opts);
      res.n_events[r] = out.n_events;
      if (outputs.binding_times)
        res.binding_times[r] = out.first_association;
    }
  });
  return res;
}

} // namespace crddme
