#include "spinmaser/algebra.hpp"

#include "spinmaser/error.hpp"

#include <algorithm>

namespace spinmaser {

std::optional<std::pair<int, int>> multiply_emitter_ops(std::pair<int, int> a,
                                                        std::pair<int, int> b) {
  if (a.second != b.first)
    return std::nullopt;
  return std::pair{a.first, b.second};
}

Monomial adjoint(const Monomial& m) {
  Monomial out;
  out.creations = m.annihilations;
  out.annihilations = m.creations;
  out.emitters = m.emitters;
  for (auto& e : out.emitters)
    std::swap(e.row, e.col);
  return out;
}

namespace {

double falling_binomial_weight(int q, int r, int k) {
  // C(q,k) C(r,k) k!
  double w = 1.0;
  for (int i = 0; i < k; ++i)
    w *= static_cast<double>(q - i) * static_cast<double>(r - i) / static_cast<double>(i + 1);
  return w;
}

void accumulate(OperatorSum& sum, const Monomial& m, cplx c) {
  if (c == cplx{})
    return;
  auto [it, inserted] = sum.try_emplace(m, c);
  if (!inserted) {
    it->second += c;
    if (it->second == cplx{})
      sum.erase(it);
  }
}

} // namespace

OperatorSum multiply(const Monomial& left, const Monomial& right) {
  OperatorSum out;

  std::vector<EmitterOp> emitters;
  auto li = left.emitters.begin();
  auto ri = right.emitters.begin();
  while (li != left.emitters.end() || ri != right.emitters.end()) {
    if (ri == right.emitters.end() || (li != left.emitters.end() && li->emitter < ri->emitter)) {
      emitters.push_back(*li++);
    } else if (li == left.emitters.end() || ri->emitter < li->emitter) {
      emitters.push_back(*ri++);
    } else {
      auto r = multiply_emitter_ops({li->row, li->col}, {ri->row, ri->col});
      if (!r)
        return out;
      emitters.push_back({li->emitter, r->first, r->second});
      ++li;
      ++ri;
    }
  }

  // a^q a†^r = sum_k C(q,k) C(r,k) k! a†^(r-k) a^(q-k)
  const int q = left.annihilations;
  const int r = right.creations;
  for (int k = 0; k <= std::min(q, r); ++k) {
    Monomial m;
    m.creations = left.creations + r - k;
    m.annihilations = q - k + right.annihilations;
    m.emitters = emitters;
    accumulate(out, m, falling_binomial_weight(q, r, k));
  }
  return out;
}

OperatorSum multiply(const OperatorSum& left, const OperatorSum& right) {
  OperatorSum out;
  for (const auto& [lm, lc] : left)
    for (const auto& [rm, rc] : right)
      for (const auto& [m, c] : multiply(lm, rm))
        accumulate(out, m, lc * rc * c);
  return out;
}

OperatorSum normal_order_product(const std::vector<OperatorFactor>& factors, cplx scalar) {
  OperatorSum acc;
  if (scalar == cplx{})
    return acc;
  acc.emplace(Monomial{}, scalar);
  for (const auto& f : factors) {
    Monomial single;
    switch (f.kind) {
    case OperatorFactor::Kind::creation:
      single.creations = 1;
      break;
    case OperatorFactor::Kind::annihilation:
      single.annihilations = 1;
      break;
    case OperatorFactor::Kind::transition:
      single.emitters.push_back(f.op);
      break;
    }
    OperatorSum next;
    for (const auto& [m, c] : acc)
      for (const auto& [pm, pc] : multiply(m, single))
        accumulate(next, pm, c * pc);
    acc = std::move(next);
  }
  return acc;
}

namespace {

Monomial relabeled(Monomial m) {
  std::sort(m.emitters.begin(), m.emitters.end(), [](const EmitterOp& a, const EmitterOp& b) {
    return std::pair{a.row, a.col} < std::pair{b.row, b.col};
  });
  for (std::size_t i = 0; i < m.emitters.size(); ++i)
    m.emitters[i].emitter = static_cast<int>(i) + 1;
  return m;
}

// Ordering used to pick the representative of a conjugate pair.
bool preferred(const Monomial& a, const Monomial& b) {
  if (a.creations - a.annihilations != b.creations - b.annihilations)
    return a.creations - a.annihilations > b.creations - b.annihilations;
  return a < b;
}

} // namespace

CanonicalMoment canonicalize_moment(const Monomial& m) {
  Monomial direct = relabeled(m);
  Monomial conj = relabeled(adjoint(m));
  if (direct == conj || preferred(direct, conj))
    return {MomentKey{std::move(direct)}, false};
  return {MomentKey{std::move(conj)}, true};
}

bool is_self_conjugate(const MomentKey& key) {
  return relabeled(adjoint(key.mono)) == key.mono;
}

int phase_charge(const Monomial& m, int upper) {
  int q = m.creations - m.annihilations;
  for (const auto& e : m.emitters)
    q += (e.row == upper) - (e.col == upper);
  return q;
}

namespace {

std::string level_pair(int row, int col) {
  if (row < 10 && col < 10)
    return std::to_string(row) + std::to_string(col);
  return std::to_string(row) + "," + std::to_string(col);
}

} // namespace

std::string render(const Monomial& m) {
  if (m.is_identity())
    return "1";
  std::string out;
  for (int i = 0; i < m.creations; ++i)
    out += out.empty() ? "ad" : "*ad";
  for (int i = 0; i < m.annihilations; ++i)
    out += out.empty() ? "a" : "*a";
  if (!out.empty() && !m.emitters.empty())
    out += "*";
  for (const auto& e : m.emitters)
    out += "s" + level_pair(e.row, e.col) + "[" + std::to_string(e.emitter) + "]";
  return out;
}

std::string render(const MomentKey& key) { return render(key.mono); }

MomentKey parse_moment_key(const std::string& text) {
  Monomial m;
  std::size_t pos = 0;
  auto fail = [&]() -> MomentKey {
    throw ConfigError("malformed moment key '" + text + "'");
  };
  if (text == "1")
    return {};
  while (pos < text.size()) {
    if (text[pos] == '*') {
      ++pos;
      continue;
    }
    if (text.compare(pos, 2, "ad") == 0) {
      if (m.annihilations > 0 || !m.emitters.empty())
        return fail();
      ++m.creations;
      pos += 2;
    } else if (text[pos] == 'a') {
      if (!m.emitters.empty())
        return fail();
      ++m.annihilations;
      ++pos;
    } else if (text[pos] == 's') {
      auto open = text.find('[', pos);
      auto close = text.find(']', pos);
      if (open == std::string::npos || close == std::string::npos || close < open)
        return fail();
      std::string levels = text.substr(pos + 1, open - pos - 1);
      EmitterOp op;
      try {
        if (auto comma = levels.find(','); comma != std::string::npos) {
          op.row = std::stoi(levels.substr(0, comma));
          op.col = std::stoi(levels.substr(comma + 1));
        } else if (levels.size() == 2) {
          op.row = levels[0] - '0';
          op.col = levels[1] - '0';
        } else {
          return fail();
        }
        op.emitter = std::stoi(text.substr(open + 1, close - open - 1));
      } catch (const std::logic_error&) {
        return fail();
      }
      if (op.row < 1 || op.col < 1 || op.emitter < 1)
        return fail();
      m.emitters.push_back(op);
      pos = close + 1;
    } else {
      return fail();
    }
  }
  std::sort(m.emitters.begin(), m.emitters.end(),
            [](const EmitterOp& a, const EmitterOp& b) { return a.emitter < b.emitter; });
  for (std::size_t i = 1; i < m.emitters.size(); ++i)
    if (m.emitters[i].emitter == m.emitters[i - 1].emitter)
      return fail();
  return canonicalize_moment(m).key;
}

} // namespace spinmaser
