#include "btpredict/learning.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "btpredict/rng.hpp"

namespace btp {

namespace {

constexpr std::string_view kModelMagic = "btpredict-model v1";

bool same_prior_config(const GaussianStats& a, const GaussianStats& b) {
  return a.n0 == b.n0 && a.sigma0_s == b.sigma0_s;
}

std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

double parse_double(std::string_view s, const char* what) {
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    throw ModelIoError(std::string("invalid ") + what + " '" + std::string(s) + "'");
  return v;
}

std::uint64_t parse_u64(std::string_view s, const char* what) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    throw ModelIoError(std::string("invalid ") + what + " '" + std::string(s) + "'");
  return v;
}

}  // namespace

GaussianStats& observe(GaussianStats& stats, std::uint32_t t_s) {
  std::uint64_t t = t_s;
  stats.n += 1;
  stats.sum_t += t;
  stats.sum_t2 += t * t;
  return stats;
}

GaussianStats merge(const GaussianStats& a, const GaussianStats& b) {
  if (!same_prior_config(a, b)) throw Error("cannot merge stats with different prior configs");
  GaussianStats out = a;
  out.n += b.n;
  out.sum_t += b.sum_t;
  out.sum_t2 += b.sum_t2;
  return out;
}

TimeDistribution mean_and_sigma(const GaussianStats& stats, double sigma_min_s) {
  if (stats.n == 0) throw Error("no estimate from empty statistics");
  double n = static_cast<double>(stats.n);
  double sum = static_cast<double>(stats.sum_t);
  double sum2 = static_cast<double>(stats.sum_t2);
  double mu = sum / n;
  double ss = std::max(0.0, sum2 - sum * sum / n);  // sum of squared deviations
  double variance = (stats.n0 * stats.sigma0_s * stats.sigma0_s + ss) / (stats.n0 + n);
  return {mu, std::max(std::sqrt(variance), sigma_min_s)};
}

Model Model::fit(std::span<const Replay> replays, const TechDag& dag,
                 const ModelConfig& config) {
  if (replays.empty()) throw Error("cannot fit a model from zero replays");
  Model m(dag, config);
  for (const Replay& r : replays) {
    if (r.race != dag.race())
      throw Error("replay race mismatch: corpus is " + std::string(to_string(r.race)) +
                  ", dag is " + std::string(to_string(dag.race())));
    auto prefixes = prefix_sequence(r);
    for (const auto& [t, tree] : prefixes) {
      std::uint32_t clamped = std::clamp<std::uint32_t>(t, 1, config.t_max_s);
      if (clamped != t) ++m.clamped_;
      auto [it, inserted] = m.entries_.try_emplace(tree);
      if (inserted) {
        it->second.stats.n0 = config.n0;
        it->second.stats.sigma0_s = config.sigma0_s;
      }
      observe(it->second.stats, clamped);
    }
    if (!prefixes.empty()) m.entries_[prefixes.back().second].prior_count += 1;
    m.replays_fitted_ += 1;
  }
  m.finalize();
  return m;
}

Model Model::from_stats(const TechDag& dag, const ModelConfig& config,
                        std::vector<std::pair<BuildTree, GaussianStats>> stats,
                        std::vector<std::pair<BuildTree, std::uint64_t>> prior_counts) {
  Model m(dag, config);
  for (auto& [tree, s] : stats) {
    m.validate_entry(tree, s);
    auto [it, inserted] = m.entries_.try_emplace(std::move(tree));
    if (!inserted) throw Error("duplicate tree in model statistics");
    it->second.stats = s;
  }
  for (auto& [tree, count] : prior_counts) {
    auto it = m.entries_.find(tree);
    if (it == m.entries_.end()) throw Error("prior count for a tree with no statistics");
    it->second.prior_count = count;
  }
  m.finalize();
  return m;
}

void Model::validate_entry(const BuildTree& bt, const GaussianStats& stats) const {
  if (!is_valid_build_tree(dag_, bt))
    throw Error("model entry is not a valid build tree for this dag");
  if (stats.n == 0) throw Error("model entry with zero observations");
  if (stats.n0 != config_.n0 || stats.sigma0_s != config_.sigma0_s)
    throw Error("model entry prior config differs from the model config");
  // Cauchy-Schwarz sanity: n * sum_t2 >= sum_t^2 (up to rounding).
  long double lhs = static_cast<long double>(stats.n) * static_cast<long double>(stats.sum_t2);
  long double rhs = static_cast<long double>(stats.sum_t) * static_cast<long double>(stats.sum_t);
  if (lhs + 1e-6L * std::max(lhs, 1.0L) < rhs)
    throw Error("inconsistent statistics: n*sum_t2 < sum_t^2");
  double mu = static_cast<double>(stats.sum_t) / static_cast<double>(stats.n);
  if (mu < 1.0 || mu > static_cast<double>(config_.t_max_s))
    throw Error("model entry mean time outside the horizon");
}

void Model::finalize() {
  double domain = static_cast<double>(entries_.size());
  std::uint64_t prior_total = 0;
  for (const auto& [tree, entry] : entries_) prior_total += entry.prior_count;

  for (auto& [tree, entry] : entries_) {
    TimeDistribution d = mean_and_sigma(entry.stats, config_.sigma_min_s);
    entry.mu = d.mu_s;
    entry.sigma = d.sigma_s;
    double z = 0;
    double two_s2 = 2.0 * entry.sigma * entry.sigma;
    for (std::uint32_t u = 1; u <= config_.t_max_s; ++u) {
      double dt = static_cast<double>(u) - entry.mu;
      z += std::exp(-dt * dt / two_s2);
    }
    entry.log_z = std::log(z);
    // Histogram priors are add-one smoothed so every tree in the domain
    // keeps strictly positive mass.
    entry.log_prior = config_.prior_mode == PriorMode::histogram
                          ? std::log(static_cast<double>(entry.prior_count + 1) /
                                     static_cast<double>(prior_total + entries_.size()))
                          : std::log(1.0 / domain);
  }
}

const Model::Entry* Model::find(const BuildTree& bt) const {
  auto it = entries_.find(bt);
  return it == entries_.end() ? nullptr : &it->second;
}

const Model::Entry& Model::require(const BuildTree& bt) const {
  const Entry* e = find(bt);
  if (!e) throw Error("build tree not in the model domain: " + to_string(bt, dag_));
  return *e;
}

void Model::check_horizon(std::uint32_t t_s) const {
  if (t_s < 1 || t_s > config_.t_max_s)
    throw Error("time " + std::to_string(t_s) + " outside the horizon [1, " +
                std::to_string(config_.t_max_s) + "]");
}

TimeDistribution Model::time_distribution(const BuildTree& bt) const {
  const Entry& e = require(bt);
  return {e.mu, e.sigma};
}

double Model::likelihood(const BuildTree& bt, std::uint32_t t_s) const {
  check_horizon(t_s);
  const Entry& e = require(bt);
  double dt = static_cast<double>(t_s) - e.mu;
  return std::exp(-dt * dt / (2.0 * e.sigma * e.sigma) - e.log_z);
}

double Model::log_weight(const Entry& entry, std::uint32_t t_s) const {
  double dt = static_cast<double>(t_s) - entry.mu;
  return -dt * dt / (2.0 * entry.sigma * entry.sigma) - entry.log_z + entry.log_prior;
}

std::size_t Model::approximate_memory_bytes() const {
  std::size_t bytes = sizeof(Model);
  for (const auto& [tree, entry] : entries_) {
    bytes += sizeof(std::pair<BuildTree, Entry>);
    bytes += tree.entries().capacity() * sizeof(BuildingCounts::Entry);
    bytes += 48;  // red-black node overhead, rough
  }
  for (const BuildingType& b : dag_.buildings())
    bytes += sizeof(BuildingType) + b.name.size() + b.prerequisites.capacity() * 4;
  return bytes;
}

void Model::save(std::ostream& out) const {
  std::ostringstream body;
  body << kModelMagic << '\n';
  body << "race " << to_string(dag_.race()) << '\n';
  body << "t_max " << config_.t_max_s << '\n';
  body << "sigma_min " << format_double(config_.sigma_min_s) << '\n';
  body << "n0 " << format_double(config_.n0) << '\n';
  body << "sigma0 " << format_double(config_.sigma0_s) << '\n';
  body << "prior_mode " << (config_.prior_mode == PriorMode::histogram ? "histogram" : "uniform")
       << '\n';
  for (const auto& [tree, entry] : entries_) {
    body << "tree " << to_string(tree, dag_) << " n " << entry.stats.n << " sum "
         << entry.stats.sum_t << " sum2 " << entry.stats.sum_t2 << " prior " << entry.prior_count
         << '\n';
  }
  std::string text = body.str();
  char checksum[17];
  std::snprintf(checksum, sizeof(checksum), "%016llx",
                static_cast<unsigned long long>(fnv1a(text)));
  out << text << "checksum " << checksum << '\n';
}

Model Model::load(std::istream& in, const TechDag& dag) {
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  // Split off and verify the trailing checksum line first.
  std::size_t tail = text.rfind("checksum ");
  if (tail == std::string::npos || (tail != 0 && text[tail - 1] != '\n'))
    throw ModelIoError("missing checksum line (truncated file?)");
  std::string body = text.substr(0, tail);
  std::string_view checksum_line(text.data() + tail, text.size() - tail);
  checksum_line.remove_prefix(9);
  while (!checksum_line.empty() && (checksum_line.back() == '\n' || checksum_line.back() == '\r'))
    checksum_line.remove_suffix(1);
  char expect[17];
  std::snprintf(expect, sizeof(expect), "%016llx", static_cast<unsigned long long>(fnv1a(body)));
  if (checksum_line != expect) throw ModelIoError("checksum mismatch (corrupt or truncated file)");

  std::istringstream lines(body);
  std::string line;
  if (!std::getline(lines, line) || line != kModelMagic)
    throw ModelIoError("unsupported model format (expected '" + std::string(kModelMagic) + "')");

  ModelConfig config;
  std::optional<Race> race;
  std::vector<std::pair<BuildTree, GaussianStats>> stats;
  std::vector<std::pair<BuildTree, std::uint64_t>> priors;

  auto next_token = [](std::string_view& rest) {
    while (!rest.empty() && rest.front() == ' ') rest.remove_prefix(1);
    std::size_t end = rest.find(' ');
    std::string_view tok = rest.substr(0, end);
    rest.remove_prefix(end == std::string_view::npos ? rest.size() : end + 1);
    return tok;
  };

  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    std::string_view rest(line);
    std::string_view key = next_token(rest);
    if (key == "race") {
      race = parse_race(next_token(rest));
      if (!race) throw ModelIoError("unknown race in model file");
    } else if (key == "t_max") {
      config.t_max_s = static_cast<std::uint32_t>(parse_u64(next_token(rest), "t_max"));
    } else if (key == "sigma_min") {
      config.sigma_min_s = parse_double(next_token(rest), "sigma_min");
    } else if (key == "n0") {
      config.n0 = parse_double(next_token(rest), "n0");
    } else if (key == "sigma0") {
      config.sigma0_s = parse_double(next_token(rest), "sigma0");
    } else if (key == "prior_mode") {
      std::string_view mode = next_token(rest);
      if (mode == "uniform")
        config.prior_mode = PriorMode::uniform;
      else if (mode == "histogram")
        config.prior_mode = PriorMode::histogram;
      else
        throw ModelIoError("unknown prior_mode '" + std::string(mode) + "'");
    } else if (key == "tree") {
      std::string_view tree_text = next_token(rest);
      BuildTree tree;
      try {
        tree = parse_counts(tree_text, dag);
      } catch (const Error& e) {
        throw ModelIoError("dag mismatch: " + std::string(e.what()));
      }
      GaussianStats s;
      s.n0 = config.n0;
      s.sigma0_s = config.sigma0_s;
      std::uint64_t prior_count = 0;
      while (!rest.empty()) {
        std::string_view field = next_token(rest);
        if (field.empty()) break;
        std::string_view value = next_token(rest);
        if (field == "n")
          s.n = parse_u64(value, "n");
        else if (field == "sum")
          s.sum_t = parse_u64(value, "sum");
        else if (field == "sum2")
          s.sum_t2 = parse_u64(value, "sum2");
        else if (field == "prior")
          prior_count = parse_u64(value, "prior");
        else
          throw ModelIoError("unknown tree field '" + std::string(field) + "'");
      }
      stats.push_back({tree, s});
      if (prior_count > 0) priors.push_back({std::move(tree), prior_count});
    } else {
      throw ModelIoError("unknown model line '" + line + "'");
    }
  }

  if (!race) throw ModelIoError("model file missing race");
  if (*race != dag.race())
    throw ModelIoError("dag mismatch: model race " + std::string(to_string(*race)) +
                       ", dag race " + std::string(to_string(dag.race())));
  try {
    return from_stats(dag, config, std::move(stats), std::move(priors));
  } catch (const Error& e) {
    throw ModelIoError(e.what());
  }
}

Model merge(const Model& a, const Model& b) {
  if (!(a.config_ == b.config_)) throw Error("cannot merge models with different configs");
  if (a.dag_.race() != b.dag_.race() || a.dag_.size() != b.dag_.size())
    throw Error("cannot merge models over different dags");
  for (std::size_t i = 0; i < a.dag_.size(); ++i)
    if (a.dag_.buildings()[i].name != b.dag_.buildings()[i].name)
      throw Error("cannot merge models over different dags");

  Model out(a.dag_, a.config_);
  out.entries_ = a.entries_;
  for (const auto& [tree, entry] : b.entries_) {
    auto [it, inserted] = out.entries_.try_emplace(tree, entry);
    if (!inserted) {
      it->second.stats = merge(it->second.stats, entry.stats);
      it->second.prior_count += entry.prior_count;
    }
  }
  out.clamped_ = a.clamped_ + b.clamped_;
  out.replays_fitted_ = a.replays_fitted_ + b.replays_fitted_;
  out.finalize();
  return out;
}

}  // namespace btp
