#include "btpredict/techtree.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <queue>
#include <sstream>

namespace btp {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    std::size_t end = s.find(sep, start);
    if (end == std::string_view::npos) {
      out.push_back(s.substr(start));
      break;
    }
    out.push_back(s.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

std::vector<std::string_view> words(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

std::uint32_t parse_u32(std::string_view s, const char* what, std::size_t line) {
  std::uint32_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    throw ParseError(std::string("invalid ") + what + " '" + std::string(s) + "'", line);
  return v;
}

}  // namespace

std::string_view to_string(Race race) {
  switch (race) {
    case Race::protoss: return "protoss";
    case Race::terran: return "terran";
    case Race::zerg: return "zerg";
  }
  return "protoss";
}

std::optional<Race> parse_race(std::string_view name) {
  if (name == "protoss") return Race::protoss;
  if (name == "terran") return Race::terran;
  if (name == "zerg") return Race::zerg;
  return std::nullopt;
}

BuildingCounts::BuildingCounts(std::vector<Entry> entries) : entries_(std::move(entries)) {
  std::sort(entries_.begin(), entries_.end());
  std::erase_if(entries_, [](const Entry& e) { return e.second == 0; });
  for (std::size_t i = 1; i < entries_.size(); ++i)
    if (entries_[i - 1].first == entries_[i].first)
      throw Error("duplicate building id in counts");
}

std::uint32_t BuildingCounts::count(std::uint32_t id) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), id,
                             [](const Entry& e, std::uint32_t v) { return e.first < v; });
  return (it != entries_.end() && it->first == id) ? it->second : 0;
}

void BuildingCounts::add(std::uint32_t id, std::uint32_t delta) {
  set_count(id, count(id) + delta);
}

void BuildingCounts::set_count(std::uint32_t id, std::uint32_t count) {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), id,
                             [](const Entry& e, std::uint32_t v) { return e.first < v; });
  if (it != entries_.end() && it->first == id) {
    if (count == 0)
      entries_.erase(it);
    else
      it->second = count;
  } else if (count > 0) {
    entries_.insert(it, {id, count});
  }
}

std::uint64_t BuildingCounts::total() const {
  std::uint64_t sum = 0;
  for (const auto& [id, c] : entries_) sum += c;
  return sum;
}

TechDag::TechDag(Race race, std::vector<BuildingType> buildings)
    : race_(race), buildings_(std::move(buildings)) {
  if (buildings_.empty()) throw DagError("tech dag has no buildings");

  for (std::uint32_t id = 0; id < buildings_.size(); ++id) {
    BuildingType& b = buildings_[id];
    b.id = id;
    b.race = race_;
    if (b.max_count < 1) throw DagError("building '" + b.name + "' has max_count 0");
    if (!by_name_.emplace(b.name, id).second)
      throw DagError("duplicate building name '" + b.name + "'");
    for (std::uint32_t p : b.prerequisites)
      if (p >= buildings_.size())
        throw DagError("building '" + b.name + "' references unknown prerequisite id " +
                       std::to_string(p));
  }

  // Kahn with a min-id heap: deterministic topological order, and any
  // leftover nodes name a cycle.
  std::vector<std::uint32_t> indegree(buildings_.size(), 0);
  std::vector<std::vector<std::uint32_t>> dependents(buildings_.size());
  for (const BuildingType& b : buildings_) {
    indegree[b.id] = static_cast<std::uint32_t>(b.prerequisites.size());
    for (std::uint32_t p : b.prerequisites) dependents[p].push_back(b.id);
  }
  std::priority_queue<std::uint32_t, std::vector<std::uint32_t>, std::greater<>> ready;
  for (std::uint32_t id = 0; id < buildings_.size(); ++id) {
    if (indegree[id] == 0) {
      ready.push(id);
      roots_.push_back(id);
    }
  }
  while (!ready.empty()) {
    std::uint32_t id = ready.top();
    ready.pop();
    topo_order_.push_back(id);
    for (std::uint32_t d : dependents[id])
      if (--indegree[d] == 0) ready.push(d);
  }
  if (topo_order_.size() != buildings_.size()) {
    std::string names;
    for (std::uint32_t id = 0; id < buildings_.size(); ++id) {
      if (indegree[id] > 0) {
        if (!names.empty()) names += ", ";
        names += buildings_[id].name;
      }
    }
    throw DagError("prerequisite cycle involving: " + names);
  }
  if (roots_.empty()) throw DagError("tech dag has no roots");

  topo_rank_.resize(buildings_.size());
  for (std::uint32_t rank = 0; rank < topo_order_.size(); ++rank)
    topo_rank_[topo_order_[rank]] = rank;
}

const BuildingType& TechDag::building(std::uint32_t id) const {
  if (id >= buildings_.size())
    throw DagError("unknown building id " + std::to_string(id));
  return buildings_[id];
}

std::optional<std::uint32_t> TechDag::find(std::string_view name) const {
  auto it = by_name_.find(std::string(name));
  return it == by_name_.end() ? std::nullopt : std::optional(it->second);
}

std::uint32_t TechDag::require(std::string_view name) const {
  auto id = find(name);
  if (!id) throw DagError("unknown building '" + std::string(name) + "'");
  return *id;
}

TechDag load_tech_dag(std::istream& in) {
  struct Decl {
    std::string name;
    std::vector<std::string> requires_names;
    std::uint32_t max_count = 1;
    std::size_t line = 0;
  };
  std::optional<Race> race;
  std::vector<Decl> decls;

  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    auto toks = words(line);
    if (toks[0] == "race") {
      if (toks.size() != 2) throw ParseError("expected 'race <name>'", line_no);
      if (race) throw ParseError("duplicate race line", line_no);
      race = parse_race(toks[1]);
      if (!race) throw ParseError("unknown race '" + std::string(toks[1]) + "'", line_no);
    } else if (toks[0] == "building") {
      if (toks.size() < 2) throw ParseError("expected 'building <name> ...'", line_no);
      Decl d;
      d.name = std::string(toks[1]);
      d.line = line_no;
      std::size_t i = 2;
      while (i < toks.size()) {
        if (toks[i] == "requires") {
          std::string list;
          for (++i; i < toks.size() && toks[i] != "max"; ++i) list += std::string(toks[i]);
          if (list.empty()) throw ParseError("'requires' with no names", line_no);
          for (auto part : split(list, ',')) {
            part = trim(part);
            if (part.empty()) throw ParseError("empty name in requires list", line_no);
            d.requires_names.emplace_back(part);
          }
        } else if (toks[i] == "max") {
          ++i;
          if (i >= toks.size()) throw ParseError("'max' with no value", line_no);
          d.max_count = parse_u32(toks[i], "max count", line_no);
          if (d.max_count < 1) throw ParseError("max count must be >= 1", line_no);
          ++i;
        } else {
          throw ParseError("unexpected token '" + std::string(toks[i]) + "'", line_no);
        }
      }
      decls.push_back(std::move(d));
    } else {
      throw ParseError("unexpected directive '" + std::string(toks[0]) + "'", line_no);
    }
  }
  if (!race) throw ParseError("missing 'race' line");
  if (decls.empty()) throw ParseError("dag file declares no buildings");

  std::unordered_map<std::string, std::uint32_t> ids;
  for (std::uint32_t id = 0; id < decls.size(); ++id)
    if (!ids.emplace(decls[id].name, id).second)
      throw ParseError("duplicate building '" + decls[id].name + "'", decls[id].line);

  std::vector<BuildingType> buildings;
  buildings.reserve(decls.size());
  for (const Decl& d : decls) {
    BuildingType b;
    b.name = d.name;
    b.max_count = d.max_count;
    for (const std::string& req : d.requires_names) {
      auto it = ids.find(req);
      if (it == ids.end())
        throw ParseError("building '" + d.name + "' requires unknown building '" + req + "'",
                         d.line);
      b.prerequisites.push_back(it->second);
    }
    buildings.push_back(std::move(b));
  }
  return TechDag(*race, std::move(buildings));
}

bool is_valid_build_tree(const TechDag& dag, const BuildTree& bt) {
  for (const auto& [id, count] : bt.entries()) {
    const BuildingType& b = dag.building(id);  // throws on unknown id
    if (count > b.max_count) return false;
    for (std::uint32_t p : b.prerequisites)
      if (bt.count(p) == 0) return false;
  }
  return true;
}

namespace {

void enumerate_rec(const TechDag& dag, bool allow_duplicates, std::uint64_t limit,
                   std::size_t pos, std::vector<std::uint32_t>& counts,
                   std::vector<BuildTree>& out) {
  const auto& order = dag.topological_order();
  if (pos == order.size()) {
    if (out.size() >= limit)
      throw EnumerationLimitError("build tree domain exceeds cap of " + std::to_string(limit));
    std::vector<BuildingCounts::Entry> entries;
    for (std::uint32_t id = 0; id < counts.size(); ++id)
      if (counts[id] > 0) entries.push_back({id, counts[id]});
    out.push_back(BuildTree(std::move(entries)));
    return;
  }
  std::uint32_t id = order[pos];
  enumerate_rec(dag, allow_duplicates, limit, pos + 1, counts, out);

  const BuildingType& b = dag.building(id);
  for (std::uint32_t p : b.prerequisites)
    if (counts[p] == 0) return;
  std::uint32_t cap = allow_duplicates ? b.max_count : 1;
  for (std::uint32_t c = 1; c <= cap; ++c) {
    counts[id] = c;
    enumerate_rec(dag, allow_duplicates, limit, pos + 1, counts, out);
  }
  counts[id] = 0;
}

}  // namespace

std::vector<BuildTree> enumerate_build_trees(const TechDag& dag, bool allow_duplicates,
                                             std::uint64_t limit) {
  std::vector<BuildTree> out;
  std::vector<std::uint32_t> counts(dag.size(), 0);
  enumerate_rec(dag, allow_duplicates, limit, 0, counts, out);
  std::sort(out.begin(), out.end());
  return out;
}

std::uint64_t distance(const BuildTree& a, const BuildTree& b) {
  std::uint64_t d = 0;
  auto ia = a.entries().begin(), ea = a.entries().end();
  auto ib = b.entries().begin(), eb = b.entries().end();
  while (ia != ea || ib != eb) {
    if (ib == eb || (ia != ea && ia->first < ib->first)) {
      d += ia->second;
      ++ia;
    } else if (ia == ea || ib->first < ia->first) {
      d += ib->second;
      ++ib;
    } else {
      d += ia->second > ib->second ? ia->second - ib->second : ib->second - ia->second;
      ++ia;
      ++ib;
    }
  }
  return d;
}

bool compatible(const BuildTree& bt, const ObservationVector& obs) {
  for (const auto& [id, c] : obs.entries())
    if (bt.count(id) < c) return false;
  return true;
}

std::string to_string(const BuildingCounts& counts, const TechDag& dag) {
  if (counts.empty()) return "-";
  std::string out;
  for (const auto& [id, c] : counts.entries()) {
    if (!out.empty()) out += ',';
    out += dag.building(id).name;
    if (c > 1) {
      out += ':';
      out += std::to_string(c);
    }
  }
  return out;
}

BuildingCounts parse_counts(std::string_view text, const TechDag& dag) {
  text = trim(text);
  if (text.empty() || text == "-") return {};
  std::vector<BuildingCounts::Entry> entries;
  for (auto item : split(text, ',')) {
    item = trim(item);
    if (item.empty()) throw ParseError("empty item in building list '" + std::string(text) + "'");
    std::string_view name = item;
    std::uint32_t count = 1;
    if (auto colon = item.find(':'); colon != std::string_view::npos) {
      name = item.substr(0, colon);
      count = parse_u32(trim(item.substr(colon + 1)), "count", 0);
      if (count < 1) throw ParseError("count must be >= 1 in '" + std::string(item) + "'");
    }
    std::uint32_t id = dag.require(name);
    if (count > dag.building(id).max_count)
      throw DagError("count " + std::to_string(count) + " exceeds cap for '" +
                     std::string(name) + "'");
    entries.push_back({id, count});
  }
  return BuildingCounts(std::move(entries));  // sorts; rejects duplicates
}

}  // namespace btp
