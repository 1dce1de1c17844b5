#include <probt/dist.hpp>

#include <json.hpp>

#include <algorithm>

namespace probt {

Dist dirac(const TermPtr& t) {
  Dist d;
  d.add(t, Rat(1));
  return d;
}

void add_scaled(Dist& into, const Dist& d, const Rat& c) {
  if (sgn(c) == 0) return;
  for (const auto& [t, w] : d.weights) into.add(t, w * c);
  into.residual += d.residual * c;
}

Rat value_mass(const Dist& d) {
  Rat m(0);
  for (const auto& [t, w] : d.weights)
    if (is_value(t)) m += w;
  return m;
}

Rat tv_distance(const Dist& a, const Dist& b) {
  Rat sum(0);
  for (const auto& [t, w] : a.weights) {
    auto it = b.weights.find(t);
    Rat diff = it == b.weights.end() ? w : Rat(w - it->second);
    sum += abs(diff);
  }
  for (const auto& [t, w] : b.weights)
    if (!a.weights.count(t)) sum += w;
  sum /= 2;
  return sum + (a.residual + b.residual) / 2;
}

std::vector<std::pair<TermPtr, Rat>> sorted_support(const Dist& d) {
  std::vector<std::pair<TermPtr, Rat>> out(d.weights.begin(), d.weights.end());
  // Precompute sort keys so comparisons don't re-print terms.
  struct Key {
    bool is_nat;
    Int nat;
    std::string printed;
  };
  std::vector<Key> keys(out.size());
  for (size_t i = 0; i < out.size(); i++) {
    auto n = as_nat(out[i].first);
    if (n) keys[i] = Key{true, *n, {}};
    else keys[i] = Key{false, Int(0), print_term(out[i].first)};
  }
  std::vector<size_t> idx(out.size());
  for (size_t i = 0; i < idx.size(); i++) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](size_t i, size_t j) {
    const Key& x = keys[i];
    const Key& y = keys[j];
    if (x.is_nat != y.is_nat) return x.is_nat;
    if (x.is_nat) return x.nat < y.nat;
    return x.printed < y.printed;
  });
  std::vector<std::pair<TermPtr, Rat>> sorted;
  sorted.reserve(out.size());
  for (size_t i : idx) sorted.push_back(std::move(out[i]));
  return sorted;
}

std::vector<std::pair<Int, Rat>> nat_support(const Dist& d) {
  std::vector<std::pair<Int, Rat>> out;
  for (const auto& [t, w] : d.weights) {
    auto n = as_nat(t);
    if (n) out.emplace_back(*n, w);
  }
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

std::string dist_json(const Dist& d) {
  nlohmann::ordered_json j;
  j["support"] = nlohmann::ordered_json::array();
  for (const auto& [t, w] : sorted_support(d)) {
    nlohmann::ordered_json entry;
    entry["term"] = print_term(t);
    auto n = as_nat(t);
    if (!n) {
      entry["nat"] = nullptr;
    } else if (n->fits_ulong_p()) {
      entry["nat"] = static_cast<uint64_t>(mpz_get_ui(n->get_mpz_t()));
    } else {
      entry["nat"] = n->get_str();
    }
    entry["prob"] = rat_str(w);
    j["support"].push_back(std::move(entry));
  }
  j["residual"] = rat_str(d.residual);
  return j.dump();
}

}  // namespace probt
