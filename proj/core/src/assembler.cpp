#include "spinmaser/assembler.hpp"

#include "spinmaser/error.hpp"
#include "spinmaser/units.hpp"

#include <algorithm>
#include <deque>
#include <sstream>

namespace spinmaser {

namespace {

constexpr cplx I{0.0, 1.0};

using CoefSum = std::map<Monomial, Coefficient>;

OperatorSum single(const std::vector<OperatorFactor>& factors, cplx scale = 1.0) {
  return normal_order_product(factors, scale);
}

OperatorSum dagger(const OperatorSum& s) {
  OperatorSum out;
  for (const auto& [m, c] : s)
    out[adjoint(m)] += std::conj(c);
  return out;
}

OperatorSum subtract(OperatorSum a, const OperatorSum& b) {
  for (const auto& [m, c] : b) {
    auto& v = a[m];
    v -= c;
    if (v == cplx{})
      a.erase(m);
  }
  return a;
}

void add_weighted(CoefSum& acc, const OperatorSum& s, const Coefficient& w) {
  for (const auto& [m, c] : s) {
    auto& slot = acc[m];
    slot += w * c;
  }
}

// Adjoint Lindblad action c† O c - (c†c O + O c†c)/2.
OperatorSum dissipate(const OperatorSum& c, const OperatorSum& o) {
  const OperatorSum cd = dagger(c);
  const OperatorSum cdc = multiply(cd, c);
  OperatorSum out = multiply(multiply(cd, o), c);
  for (const auto& part : {multiply(cdc, o), multiply(o, cdc)})
    for (const auto& [m, v] : part) {
      auto& slot = out[m];
      slot -= 0.5 * v;
    }
  std::erase_if(out, [](const auto& kv) { return kv.second == cplx{}; });
  return out;
}

OperatorFactor ad() { return OperatorFactor::creation(); }
OperatorFactor an() { return OperatorFactor::annihilation(); }
OperatorFactor sig(int k, int i, int j) { return OperatorFactor::transition(k, i, j); }

} // namespace

std::map<Monomial, Coefficient> derive_operator_eom(const ModelSpec& spec, const Monomial& product,
                                                    RotatingFrame frame) {
  const int lo = spec.scheme.lower;
  const int up = spec.scheme.upper;
  const double delta = spec.detuning();
  const double g = spec.coupling.g;
  const double n_emitters = spec.coupling.emitter_count;

  std::vector<int> labels;
  for (const auto& e : product.emitters) {
    if (e.row < 1 || e.row > spec.scheme.level_count || e.col < 1 ||
        e.col > spec.scheme.level_count)
      throw DomainError("moment " + render(product) + " references an invalid level");
    labels.push_back(e.emitter);
  }
  const int fresh = labels.empty() ? 1 : *std::max_element(labels.begin(), labels.end()) + 1;
  const double fresh_multiplicity = n_emitters - static_cast<double>(labels.size());

  const OperatorSum o{{product, 1.0}};
  CoefSum acc;

  // i [H, O]
  auto commutator = [&](const OperatorSum& h, cplx scale) {
    add_weighted(acc, subtract(multiply(h, o), multiply(o, h)), Coefficient{I * scale, {}});
  };
  // Collective sum over emitters: every representative label present in O,
  // plus the remaining N - |labels| emitters through one fresh label.
  auto collective = [&](auto make, cplx scale) {
    for (int k : labels)
      commutator(make(k), scale);
    if (fresh_multiplicity != 0.0)
      commutator(make(fresh), scale * fresh_multiplicity);
  };

  if (frame == RotatingFrame::spin) {
    commutator(single({ad(), an()}), delta);
  } else {
    collective([&](int k) { return single({sig(k, up, up)}); }, -delta);
  }
  collective(
      [&](int k) {
        OperatorSum h = single({ad(), sig(k, lo, up)});
        for (const auto& [m, c] : single({sig(k, up, lo), an()}))
          h[m] += c;
        return h;
      },
      g);

  const double kappa = spec.cavity.damping;
  const double nth = spec.cavity.thermal_occupation();
  add_weighted(acc, dissipate(single({an()}), o), Coefficient{kappa * (nth + 1.0), {}});
  if (nth != 0.0)
    add_weighted(acc, dissipate(single({ad()}), o), Coefficient{kappa * nth, {}});

  for (const auto& ch : spec.channels) {
    for (int k : labels) {
      if (ch.kind == ChannelKind::transition) {
        Coefficient w{ch.rate, ch.pump_scaled ? 1.0 : 0.0};
        if (w.is_zero())
          continue;
        add_weighted(acc, dissipate(single({sig(k, ch.to, ch.from)}), o), w);
      } else {
        if (ch.rate == 0.0)
          continue;
        OperatorSum c = single({sig(k, ch.from, ch.from)});
        c[Monomial{0, 0, {{k, ch.to, ch.to}}}] -= 1.0;
        add_weighted(acc, dissipate(c, o), Coefficient{0.5 * ch.rate, {}});
      }
    }
  }

  std::erase_if(acc, [](const auto& kv) { return kv.second.is_zero(); });
  return acc;
}

std::vector<std::pair<Monomial, double>> eliminate_population(const Monomial& m, int level_count,
                                                              int eliminated) {
  std::vector<std::pair<Monomial, double>> out{{m, 1.0}};
  for (std::size_t pos = 0; pos < m.emitters.size(); ++pos) {
    const int label = m.emitters[pos].emitter;
    std::vector<std::pair<Monomial, double>> next;
    for (auto& [mono, c] : out) {
      auto it = std::find_if(mono.emitters.begin(), mono.emitters.end(),
                             [&](const EmitterOp& e) { return e.emitter == label; });
      if (it == mono.emitters.end() || it->row != eliminated || it->col != eliminated) {
        next.emplace_back(mono, c);
        continue;
      }
      Monomial without = mono;
      without.emitters.erase(without.emitters.begin() + (it - mono.emitters.begin()));
      next.emplace_back(without, c);
      for (int i = 1; i <= level_count; ++i) {
        if (i == eliminated)
          continue;
        Monomial with = mono;
        with.emitters[it - mono.emitters.begin()] = {label, i, i};
        next.emplace_back(with, -c);
      }
    }
    out = std::move(next);
  }
  return out;
}

namespace {

Monomial combine_units(const std::vector<Monomial>& units) {
  Monomial out;
  for (const auto& u : units) {
    out.creations += u.creations;
    out.annihilations += u.annihilations;
    out.emitters.insert(out.emitters.end(), u.emitters.begin(), u.emitters.end());
  }
  std::sort(out.emitters.begin(), out.emitters.end(),
            [](const EmitterOp& a, const EmitterOp& b) { return a.emitter < b.emitter; });
  return out;
}

} // namespace

std::vector<ClosureTerm> cumulant_close(const Monomial& m) {
  if (m.order() != 3)
    throw InternalError("cumulant closure applies to order-3 moments, got " + render(m));
  std::vector<Monomial> units;
  for (int i = 0; i < m.creations; ++i)
    units.push_back(Monomial{1, 0, {}});
  for (int i = 0; i < m.annihilations; ++i)
    units.push_back(Monomial{0, 1, {}});
  for (const auto& e : m.emitters)
    units.push_back(Monomial{0, 0, {e}});
  const auto& x = units[0];
  const auto& y = units[1];
  const auto& z = units[2];
  return {
      {1.0, {combine_units({x, y}), z}},
      {1.0, {combine_units({x, z}), y}},
      {1.0, {combine_units({y, z}), x}},
      {-2.0, {x, y, z}},
  };
}

cplx cumulant_closure_value(cplx x, cplx y, cplx z, cplx xy, cplx xz, cplx yz) {
  return xy * z + xz * y + yz * x - 2.0 * x * y * z;
}

namespace {

struct Reducer {
  const ModelSpec& spec;
  const AssemblyOptions& options;
  int eliminated;
  std::map<std::vector<MomentRef>, Coefficient> terms;

  bool pruned(const Monomial& m) const {
    return options.phase_pruning && phase_charge(m, spec.scheme.upper) != 0;
  }

  static MomentRef ref_of(const Monomial& m) {
    auto c = canonicalize_moment(m);
    return {std::move(c.key), c.conjugated};
  }

  void emit(std::vector<MomentRef> factors, const Coefficient& c) {
    std::sort(factors.begin(), factors.end());
    terms[std::move(factors)] += c;
  }

  void add(const Monomial& raw, const Coefficient& c) {
    for (const auto& [m, sign] : eliminate_population(raw, spec.scheme.level_count, eliminated)) {
      if (m.emitters.size() > 2)
        throw InternalError("moment " + render(m) +
                            " carries a third emitter label; the collective-sum reduction is "
                            "inconsistent");
      if (pruned(m))
        continue;
      const Coefficient w = c * sign;
      if (m.is_identity()) {
        emit({}, w);
      } else if (m.order() <= 2) {
        emit({ref_of(m)}, w);
      } else if (m.order() == 3) {
        for (const auto& t : cumulant_close(m)) {
          if (std::any_of(t.factors.begin(), t.factors.end(),
                          [&](const Monomial& f) { return pruned(f); }))
            continue;
          std::vector<MomentRef> refs;
          for (const auto& f : t.factors)
            refs.push_back(ref_of(f));
          emit(std::move(refs), w * t.coeff);
        }
      } else {
        throw InternalError("moment " + render(m) + " has order " + std::to_string(m.order()) +
                            " > 3 in an equation of motion");
      }
    }
  }

  SymbolicExpr result() const {
    SymbolicExpr out;
    for (const auto& [factors, c] : terms)
      if (!c.is_zero())
        out.push_back({c, factors});
    return out;
  }
};

} // namespace

SymbolicExpr derive_moment_eom(const ModelSpec& spec, const Monomial& product,
                               const AssemblyOptions& options) {
  Reducer r{spec, options, spec.scheme.eliminated_level(), {}};
  for (const auto& [m, c] : derive_operator_eom(spec, product, options.frame))
    r.add(m, c);
  return r.result();
}

SymbolicExpr derive_moment_eom(const ModelSpec& spec, const MomentKey& key,
                               const AssemblyOptions& options) {
  return derive_moment_eom(spec, key.mono, options);
}

int MomentSystem::index_of(const MomentKey& key) const {
  auto it = index.find(key);
  return it == index.end() ? -1 : it->second;
}

std::vector<cplx> MomentSystem::evaluate(const std::vector<cplx>& values, double xi) const {
  std::vector<cplx> out(keys.size());
  for (std::size_t i = 0; i < keys.size(); ++i) {
    cplx sum{};
    for (const auto& t : equations[i]) {
      cplx v = t.coeff.at(xi);
      for (const auto& f : t.factors) {
        const cplx x = values.at(static_cast<std::size_t>(index_of(f.key)));
        v *= f.conj ? std::conj(x) : x;
      }
      sum += v;
    }
    out[i] = sum;
  }
  return out;
}

namespace {

std::string format_complex(cplx c) {
  return "(" + format_double(c.real()) + "," + format_double(c.imag()) + ")";
}

} // namespace

std::string MomentSystem::dump() const {
  std::ostringstream out;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    out << "d/dt " << render(keys[i]) << " =";
    for (const auto& t : equations[i]) {
      out << " + ";
      if (t.coeff.pump == cplx{})
        out << format_complex(t.coeff.base);
      else
        out << "[" << format_complex(t.coeff.base) << " + xi*" << format_complex(t.coeff.pump)
            << "]";
      for (const auto& f : t.factors)
        out << " " << (f.conj ? "conj(" : "<") << render(f.key) << (f.conj ? ")" : ">");
    }
    out << "\n";
  }
  return out.str();
}

std::vector<Monomial> default_seeds(const ModelSpec& spec, const AssemblyOptions& options) {
  std::vector<Monomial> seeds;
  seeds.push_back(Monomial{1, 1, {}});
  for (int i = 1; i <= spec.scheme.level_count; ++i)
    seeds.push_back(Monomial{0, 0, {{1, i, i}}});
  if (options.dicke_seeds) {
    const int l = spec.scheme.lower;
    const int u = spec.scheme.upper;
    auto pair = [](int i, int j, int k, int m) {
      return Monomial{0, 0, {{1, i, j}, {2, k, m}}};
    };
    seeds.push_back(pair(u, u, u, u));
    seeds.push_back(pair(l, l, u, u));
    seeds.push_back(pair(l, l, l, l));
    seeds.push_back(pair(l, u, u, l));
    if (!options.phase_pruning) {
      seeds.push_back(pair(l, u, l, u));
      seeds.push_back(Monomial{0, 0, {{1, l, u}}});
    }
  }
  return seeds;
}

MomentSystem complete_system(const ModelSpec& spec, const AssemblyOptions& options,
                             const std::vector<Monomial>& extra_seeds) {
  auto report = validate_model(spec);
  if (!report.ok())
    throw ConfigError("cannot assemble invalid model: " + report.issues.front());

  MomentSystem sys;
  sys.spec = spec;
  sys.options = options;
  sys.eliminated_level = spec.scheme.eliminated_level();

  std::map<MomentKey, SymbolicExpr> derived;
  std::deque<MomentKey> queue;
  auto enqueue = [&](const MomentKey& key) {
    if (derived.contains(key) ||
        std::find(queue.begin(), queue.end(), key) != queue.end())
      return;
    queue.push_back(key);
  };

  auto seeds = default_seeds(spec, options);
  seeds.insert(seeds.end(), extra_seeds.begin(), extra_seeds.end());
  for (const auto& seed : seeds) {
    if (seed.order() > 2)
      throw DomainError("seed " + render(seed) + " has order above 2");
    for (const auto& [m, c] : eliminate_population(seed, spec.scheme.level_count,
                                                   sys.eliminated_level)) {
      if (m.is_identity())
        continue;
      if (options.phase_pruning && phase_charge(m, spec.scheme.upper) != 0)
        continue;
      enqueue(canonicalize_moment(m).key);
    }
  }

  while (!queue.empty()) {
    MomentKey key = std::move(queue.front());
    queue.pop_front();
    if (derived.size() >= options.max_keys)
      throw InternalError("moment completion exceeded " + std::to_string(options.max_keys) +
                          " keys; last key " + render(key) + ", " +
                          std::to_string(queue.size()) + " pending");
    auto eq = derive_moment_eom(spec, key, options);
    for (const auto& t : eq)
      for (const auto& f : t.factors)
        enqueue(f.key);
    derived.emplace(std::move(key), std::move(eq));
  }

  std::vector<MomentKey> keys;
  for (const auto& [k, _] : derived)
    keys.push_back(k);
  std::stable_sort(keys.begin(), keys.end(), [](const MomentKey& a, const MomentKey& b) {
    return a.order() < b.order();
  });
  for (auto& k : keys) {
    sys.index.emplace(k, static_cast<int>(sys.keys.size()));
    sys.equations.push_back(std::move(derived.at(k)));
    sys.keys.push_back(std::move(k));
  }
  return sys;
}

CompiledMomentSystem::CompiledMomentSystem(MomentSystem system) : system_(std::move(system)) {
  model_hash_ = spinmaser::model_hash(system_.spec);
  slots_.resize(system_.keys.size());
  for (std::size_t i = 0; i < system_.keys.size(); ++i) {
    const auto& key = system_.keys[i];
    slots_[i].re = dimension_++;
    if (!is_self_conjugate(key))
      slots_[i].im = dimension_++;
    const auto& m = key.mono;
    if (m.emitters.empty() && m.creations == 1 && m.annihilations == 1)
      photon_slots_.push_back(slots_[i].re);
  }
  for (std::size_t i = 0; i < system_.equations.size(); ++i) {
    for (const auto& t : system_.equations[i]) {
      if (t.factors.size() > 3)
        throw InternalError("term with more than three moment factors");
      Term term;
      term.target = static_cast<int>(i);
      term.base = t.coeff.base;
      term.pump = t.coeff.pump;
      term.count = static_cast<int>(t.factors.size());
      for (int j = 0; j < term.count; ++j) {
        const int idx = system_.index_of(t.factors[j].key);
        if (idx < 0)
          throw InternalError("moment system is not closed: " + render(t.factors[j].key) +
                              " has no equation");
        term.key[j] = idx;
        term.conj[j] = t.factors[j].conj;
      }
      terms_.push_back(term);
    }
  }
}

cplx CompiledMomentSystem::value(const double* y, int key) const {
  const Slot& s = slots_[key];
  return {y[s.re], s.im >= 0 ? y[s.im] : 0.0};
}

cplx CompiledMomentSystem::value(const double* y, const MomentRef& ref) const {
  const int idx = key_index(ref.key);
  if (idx < 0)
    throw DomainError("moment " + render(ref.key) + " is not part of the system");
  const cplx v = value(y, idx);
  return ref.conj ? std::conj(v) : v;
}

Eigen::VectorXd CompiledMomentSystem::pack(const std::vector<cplx>& values) const {
  if (values.size() != slots_.size())
    throw DomainError("pack: expected " + std::to_string(slots_.size()) + " moment values");
  Eigen::VectorXd y(dimension_);
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    y[slots_[i].re] = values[i].real();
    if (slots_[i].im >= 0)
      y[slots_[i].im] = values[i].imag();
  }
  return y;
}

std::vector<cplx> CompiledMomentSystem::unpack(const Eigen::VectorXd& y) const {
  std::vector<cplx> out(slots_.size());
  for (std::size_t i = 0; i < slots_.size(); ++i)
    out[i] = value(y.data(), static_cast<int>(i));
  return out;
}

void CompiledMomentSystem::rhs(const double* y, double xi, double* dydt) const {
  std::fill(dydt, dydt + dimension_, 0.0);
  for (const auto& t : terms_) {
    cplx v = t.base + t.pump * xi;
    for (int j = 0; j < t.count; ++j) {
      const cplx f = value(y, t.key[j]);
      v *= t.conj[j] ? std::conj(f) : f;
    }
    const Slot& s = slots_[t.target];
    dydt[s.re] += v.real();
    if (s.im >= 0)
      dydt[s.im] += v.imag();
  }
}

void CompiledMomentSystem::rhs_magnitude(const double* y, double xi, double* out) const {
  std::fill(out, out + dimension_, 0.0);
  for (const auto& t : terms_) {
    cplx v = t.base + t.pump * xi;
    for (int j = 0; j < t.count; ++j)
      v *= value(y, t.key[j]);
    const Slot& s = slots_[t.target];
    out[s.re] += std::abs(v);
    if (s.im >= 0)
      out[s.im] += std::abs(v);
  }
}

void CompiledMomentSystem::rhs(const Eigen::VectorXd& y, double xi, Eigen::VectorXd& dydt) const {
  dydt.resize(dimension_);
  rhs(y.data(), xi, dydt.data());
}

void CompiledMomentSystem::jacobian(const Eigen::VectorXd& y, double xi,
                                    Eigen::MatrixXd& jac) const {
  jac.setZero(dimension_, dimension_);
  const double* py = y.data();
  for (const auto& t : terms_) {
    const cplx c = t.base + t.pump * xi;
    std::array<cplx, 3> f{};
    for (int j = 0; j < t.count; ++j) {
      const cplx v = value(py, t.key[j]);
      f[j] = t.conj[j] ? std::conj(v) : v;
    }
    const Slot& target = slots_[t.target];
    for (int j = 0; j < t.count; ++j) {
      cplx others = c;
      for (int l = 0; l < t.count; ++l)
        if (l != j)
          others *= f[l];
      const Slot& src = slots_[t.key[j]];
      auto deposit = [&](int col, cplx d) {
        jac(target.re, col) += d.real();
        if (target.im >= 0)
          jac(target.im, col) += d.imag();
      };
      deposit(src.re, others);
      if (src.im >= 0)
        deposit(src.im, others * (t.conj[j] ? -I : I));
    }
  }
}

CompiledMomentSystem compile_rhs(MomentSystem system) {
  return CompiledMomentSystem(std::move(system));
}

} // namespace spinmaser
