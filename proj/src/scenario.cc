// Copyright 2026 The pab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "pab/scenario.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "pab/offline.h"

namespace pab {
namespace {

using Json = nlohmann::json;
namespace fs = std::filesystem;

std::string JoinErrors(const std::vector<FieldError>& errors) {
  std::string out;
  for (const FieldError& e : errors) {
    if (!out.empty()) out += "; ";
    out += e.field + ": " + e.message;
  }
  return out;
}

// Typed accessors that record a field error instead of throwing.
class Reader {
 public:
  explicit Reader(std::vector<FieldError>& errors) : errors_(errors) {}

  void Fail(const std::string& field, const std::string& message) {
    errors_.push_back({field, message});
  }

  void CheckKeys(const Json& obj, const std::string& prefix,
                 const std::set<std::string>& allowed) {
    for (const auto& [key, value] : obj.items()) {
      if (!allowed.count(key)) Fail(prefix + key, "unknown key");
    }
  }

  template <typename T>
  std::optional<T> Get(const Json& obj, const std::string& key,
                       const std::string& field, bool required) {
    if (!obj.contains(key)) {
      if (required) Fail(field, "is required");
      return std::nullopt;
    }
    const Json& v = obj.at(key);
    if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) return TypeError(field, "a string");
      return v.get<std::string>();
    } else if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) return TypeError(field, "a number");
      return v.get<double>();
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
      if (!v.is_number_unsigned()) return TypeError(field, "an unsigned integer");
      return v.get<std::uint64_t>();
    } else if constexpr (std::is_same_v<T, int>) {
      if (!v.is_number_integer()) return TypeError(field, "an integer");
      const auto x = v.get<std::int64_t>();
      if (x < std::numeric_limits<int>::min() ||
          x > std::numeric_limits<int>::max()) {
        return TypeError(field, "an integer in range");
      }
      return static_cast<int>(x);
    } else if constexpr (std::is_same_v<T, std::vector<double>>) {
      if (!v.is_array()) return TypeError(field, "an array of numbers");
      std::vector<double> out;
      for (const Json& x : v) {
        if (!x.is_number()) return TypeError(field, "an array of numbers");
        out.push_back(x.get<double>());
      }
      return out;
    } else if constexpr (std::is_same_v<T, std::vector<int>>) {
      if (!v.is_array()) return TypeError(field, "an array of integers");
      std::vector<int> out;
      for (const Json& x : v) {
        if (!x.is_number_integer()) {
          return TypeError(field, "an array of integers");
        }
        out.push_back(x.get<int>());
      }
      return out;
    } else if constexpr (std::is_same_v<T, std::vector<std::vector<double>>>) {
      if (!v.is_array()) return TypeError(field, "an array of number arrays");
      std::vector<std::vector<double>> out;
      for (const Json& row : v) {
        if (!row.is_array()) return TypeError(field, "an array of number arrays");
        std::vector<double> r;
        for (const Json& x : row) {
          if (!x.is_number()) {
            return TypeError(field, "an array of number arrays");
          }
          r.push_back(x.get<double>());
        }
        out.push_back(std::move(r));
      }
      return out;
    }
  }

  // Maps a string field onto one of `choices`.
  template <typename E>
  std::optional<E> Choice(const Json& obj, const std::string& key,
                          const std::string& field, bool required,
                          const std::vector<std::pair<std::string, E>>& choices) {
    auto s = Get<std::string>(obj, key, field, required);
    if (!s) return std::nullopt;
    for (const auto& [name, value] : choices) {
      if (*s == name) return value;
    }
    std::string names;
    for (const auto& c : choices) names += (names.empty() ? "" : ", ") + c.first;
    Fail(field, "must be one of: " + names);
    return std::nullopt;
  }

 private:
  std::nullopt_t TypeError(const std::string& field, const std::string& what) {
    Fail(field, "must be " + what);
    return std::nullopt;
  }

  std::vector<FieldError>& errors_;
};

AgentConfig ParseAgent(Reader& r, const Json& obj, const std::string& prefix) {
  AgentConfig a;
  if (!obj.is_object()) {
    r.Fail(prefix.substr(0, prefix.size() - 1), "must be an object");
    return a;
  }
  r.CheckKeys(obj, prefix,
              {"algorithm", "feedback", "estimator", "eta", "gamma",
               "valuation", "units", "contexts", "context_probabilities",
               "bid"});
  if (auto v = r.Choice<Algorithm>(
          obj, "algorithm", prefix + "algorithm", true,
          {{"decoupled_ew", Algorithm::kDecoupledEw},
           {"contextual_ew", Algorithm::kContextualEw},
           {"omd", Algorithm::kOmd},
           {"fixed", Algorithm::kFixed},
           {"uniform_random", Algorithm::kUniformRandom}})) {
    a.algorithm = *v;
  }
  if (auto v = r.Choice<Feedback>(obj, "feedback", prefix + "feedback", false,
                                  {{"full", Feedback::kFullInfo},
                                   {"bandit", Feedback::kBandit}})) {
    a.feedback = *v;
  }
  if (auto v = r.Choice<Estimator>(obj, "estimator", prefix + "estimator",
                                   false,
                                   {{"ipw", Estimator::kIpw},
                                    {"ix", Estimator::kIx}})) {
    a.estimator = *v;
  }
  a.eta = r.Get<double>(obj, "eta", prefix + "eta", false);
  a.gamma = r.Get<double>(obj, "gamma", prefix + "gamma", false);
  if (obj.contains("contexts")) {
    a.valuation_source = ValuationSource::kContexts;
    if (auto v = r.Get<std::vector<std::vector<double>>>(
            obj, "contexts", prefix + "contexts", true)) {
      a.contexts = *v;
    }
    if (auto v = r.Get<std::vector<double>>(obj, "context_probabilities",
                                            prefix + "context_probabilities",
                                            true)) {
      a.context_probabilities = *v;
    }
    if (obj.contains("valuation")) {
      r.Fail(prefix + "valuation", "give either valuation or contexts");
    }
  } else if (obj.contains("valuation") && obj.at("valuation").is_string()) {
    if (obj.at("valuation").get<std::string>() != "uniform") {
      r.Fail(prefix + "valuation", "the only named valuation is \"uniform\"");
    }
    a.valuation_source = ValuationSource::kUniform;
    if (auto v = r.Get<int>(obj, "units", prefix + "units", true)) {
      a.units = *v;
    }
  } else if (auto v = r.Get<std::vector<double>>(obj, "valuation",
                                                 prefix + "valuation", true)) {
    a.valuation = *v;
  }
  if (a.valuation_source != ValuationSource::kUniform && obj.contains("units")) {
    r.Fail(prefix + "units", "only used with a uniform valuation");
  }
  if (a.valuation_source != ValuationSource::kContexts &&
      obj.contains("context_probabilities")) {
    r.Fail(prefix + "context_probabilities", "only used with contexts");
  }
  if (auto v = r.Get<std::vector<double>>(obj, "bid", prefix + "bid", false)) {
    a.bid = *v;
  }
  if (a.algorithm == Algorithm::kFixed && a.bid.empty()) {
    r.Fail(prefix + "bid", "fixed bidders need a bid");
  }
  return a;
}

EnvironmentConfig ParseEnvironment(Reader& r, const Json& obj) {
  EnvironmentConfig env;
  if (!obj.is_object()) {
    r.Fail("environment", "must be an object");
    return env;
  }
  auto kind = r.Choice<Environment>(
      obj, "type", "environment.type", true,
      {{"stochastic", Environment::kStochastic},
       {"lower_bound", Environment::kLowerBound},
       {"self_play", Environment::kSelfPlay}});
  if (!kind) return env;
  env.kind = *kind;
  switch (env.kind) {
    case Environment::kStochastic:
      r.CheckKeys(obj, "environment.",
                  {"type", "support", "probabilities", "tie"});
      if (auto v = r.Get<std::vector<std::vector<double>>>(
              obj, "support", "environment.support", true)) {
        env.support = *v;
      }
      if (auto v = r.Get<std::vector<double>>(
              obj, "probabilities", "environment.probabilities", true)) {
        env.probabilities = *v;
      }
      if (auto v = r.Choice<TieBreak>(obj, "tie", "environment.tie", false,
                                      {{"bidder_wins", TieBreak::kBidderWins},
                                       {"bidder_loses",
                                        TieBreak::kBidderLoses}})) {
        env.tie = *v;
      }
      break;
    case Environment::kLowerBound:
      r.CheckKeys(obj, "environment.", {"type", "delta", "variant"});
      env.delta = r.Get<double>(obj, "delta", "environment.delta", false);
      if (auto v = r.Choice<LowerBoundVariant>(
              obj, "variant", "environment.variant", false,
              {{"F", LowerBoundVariant::kF}, {"G", LowerBoundVariant::kG}})) {
        env.variant = *v;
      }
      break;
    case Environment::kSelfPlay:
      r.CheckKeys(obj, "environment.", {"type"});
      break;
  }
  return env;
}

std::string ReadFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioError(path.string(), "cannot be read");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Writes via a temporary sibling and a rename so readers never observe a
// partially written file.
void WriteAtomically(const fs::path& path, const std::string& contents) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << contents;
    if (!out) throw std::runtime_error("failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string ReplicationName(const std::string& stem, int r,
                            const std::string& ext) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%03d.%s", stem.c_str(), r, ext.c_str());
  return buf;
}

struct AgentSummary {
  int replication = 0;
  int agent = 0;
  std::uint64_t seed = 0;
  int rounds = 0;
  RegretReport regret;
  double mean_utility = 0.0;
  double tail_mean_utility = 0.0;
  std::optional<double> normalized_welfare;
  std::optional<double> normalized_revenue;
  std::optional<double> tail_abs_log2_spread;
};

// Mean of the last ceil(fraction * n) entries of a series.
int TailStart(int rounds, double fraction) {
  const int tail = static_cast<int>(std::ceil(fraction * rounds));
  return std::max(0, rounds - std::max(tail, 1));
}

std::vector<AgentSummary> Summarize(const BidGrid& grid,
                                    const ExperimentConfig& config,
                                    const RunLog& log, int replication,
                                    std::string* market_csv) {
  std::vector<AgentSummary> out;
  std::optional<MarketMetrics> market;
  std::optional<double> tail_spread;
  if (log.agents() > 1) {
    market = ComputeMarketMetrics(grid, log);
    double sum = 0.0;
    int count = 0;
    for (int t = TailStart(log.rounds, 0.05); t < log.rounds; ++t) {
      if (const auto& s = market->rounds[t].log2_winning_spread) {
        sum += std::abs(*s);
        ++count;
      }
    }
    if (count > 0) tail_spread = sum / count;
    std::ostringstream csv;
    csv << "t,welfare,revenue,max_welfare,log2_winning_spread,"
           "log2_winning_losing\n";
    for (int t = 0; t < log.rounds; ++t) {
      const MarketRoundMetrics& m = market->rounds[t];
      csv << t << ',' << FormatDouble(m.welfare) << ','
          << FormatDouble(m.revenue) << ',' << FormatDouble(m.max_welfare)
          << ',';
      if (m.log2_winning_spread) csv << FormatDouble(*m.log2_winning_spread);
      csv << ',';
      if (m.log2_winning_losing) csv << FormatDouble(*m.log2_winning_losing);
      csv << '\n';
    }
    *market_csv = csv.str();
  }
  for (int n = 0; n < log.agents(); ++n) {
    AgentSummary s;
    s.replication = replication;
    s.agent = n;
    s.seed = log.seed;
    s.rounds = log.rounds;
    s.regret = ComputeRegret(grid, log, n, config.checkpoints);
    if (log.rounds > 0) {
      s.mean_utility = s.regret.realized_utility / log.rounds;
      const int start = TailStart(log.rounds, 0.1);
      double tail = 0.0;
      for (int t = start; t < log.rounds; ++t) {
        tail += log.at(t, n).outcome.utility;
      }
      s.tail_mean_utility = tail / (log.rounds - start);
    }
    if (market) {
      s.normalized_welfare = market->mean_normalized_welfare;
      s.normalized_revenue = market->mean_normalized_revenue;
      s.tail_abs_log2_spread = tail_spread;
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::string BidString(const BidGrid& grid, const BidVector& bid,
                      const char* sep) {
  std::string out;
  for (int m = 0; m < bid.units(); ++m) {
    if (m > 0) out += sep;
    out += FormatDouble(grid.value(bid[m]));
  }
  return out;
}

std::string OptionalCell(const std::optional<double>& x) {
  return x ? FormatDouble(*x) : std::string();
}

std::string MetricsCsv(const BidGrid& grid,
                       const std::vector<AgentSummary>& rows) {
  std::ostringstream out;
  out << "replication,agent,seed,rounds,realized_utility,mean_utility,"
         "tail_mean_utility,benchmark_utility,benchmark_bid,"
         "discretized_regret,continuous_regret_bound,checkpoint_regret,"
         "normalized_welfare,normalized_revenue,tail_abs_log2_spread\n";
  for (const AgentSummary& s : rows) {
    std::string checkpoints;
    for (std::size_t i = 0; i < s.regret.checkpoint_rounds.size(); ++i) {
      if (i > 0) checkpoints += ';';
      checkpoints += std::to_string(s.regret.checkpoint_rounds[i]) + ':' +
                     FormatDouble(s.regret.checkpoint_regret[i]);
    }
    out << s.replication << ',' << s.agent << ',' << s.seed << ','
        << s.rounds << ',' << FormatDouble(s.regret.realized_utility) << ','
        << FormatDouble(s.mean_utility) << ','
        << FormatDouble(s.tail_mean_utility) << ','
        << FormatDouble(s.regret.benchmark_utility) << ','
        << BidString(grid, s.regret.benchmark_bid, ";") << ','
        << FormatDouble(s.regret.discretized_regret) << ','
        << FormatDouble(s.regret.continuous_regret_bound) << ','
        << checkpoints << ',' << OptionalCell(s.normalized_welfare) << ','
        << OptionalCell(s.normalized_revenue) << ','
        << OptionalCell(s.tail_abs_log2_spread) << '\n';
  }
  return out.str();
}

std::string MetricsJson(const BidGrid& grid,
                        const std::vector<AgentSummary>& rows) {
  Json arr = Json::array();
  for (const AgentSummary& s : rows) {
    Json bid = Json::array();
    for (int b : s.regret.benchmark_bid.levels) bid.push_back(grid.value(b));
    Json checkpoints = Json::array();
    for (std::size_t i = 0; i < s.regret.checkpoint_rounds.size(); ++i) {
      checkpoints.push_back({{"rounds", s.regret.checkpoint_rounds[i]},
                             {"discretized_regret",
                              s.regret.checkpoint_regret[i]}});
    }
    auto opt = [](const std::optional<double>& x) {
      return x ? Json(*x) : Json(nullptr);
    };
    arr.push_back({{"replication", s.replication},
                   {"agent", s.agent},
                   {"seed", s.seed},
                   {"rounds", s.rounds},
                   {"realized_utility", s.regret.realized_utility},
                   {"mean_utility", s.mean_utility},
                   {"tail_mean_utility", s.tail_mean_utility},
                   {"benchmark_utility", s.regret.benchmark_utility},
                   {"benchmark_bid", bid},
                   {"discretized_regret", s.regret.discretized_regret},
                   {"continuous_regret_bound",
                    s.regret.continuous_regret_bound},
                   {"checkpoints", checkpoints},
                   {"normalized_welfare", opt(s.normalized_welfare)},
                   {"normalized_revenue", opt(s.normalized_revenue)},
                   {"tail_abs_log2_spread", opt(s.tail_abs_log2_spread)}});
  }
  return Json({{"rows", arr}}).dump(2) + "\n";
}

std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double ParseNumber(const std::string& text, const std::string& where) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  while (used < text.size() && std::isspace(static_cast<unsigned char>(text[used]))) {
    ++used;
  }
  if (text.empty() || used != text.size()) {
    throw ScenarioError(where, "'" + text + "' is not a number");
  }
  return x;
}

std::vector<CompetingBids> ReadHistoryFile(const fs::path& path,
                                           const BidGrid& grid) {
  std::ifstream in(path);
  if (!in) throw ScenarioError(path.string(), "cannot be read");
  std::vector<CompetingBids> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    std::vector<int> levels;
    for (const std::string& cell : SplitCsvLine(line)) {
      try {
        levels.push_back(grid.LevelOf(ParseNumber(cell, where)));
      } catch (const std::invalid_argument& e) {
        throw ScenarioError(where, e.what());
      }
    }
    if (!out.empty() && static_cast<int>(levels.size()) != out[0].supply()) {
      throw ScenarioError(where, "row length differs from the first row");
    }
    try {
      out.emplace_back(std::move(levels));
    } catch (const std::invalid_argument& e) {
      throw ScenarioError(where, e.what());
    }
  }
  return out;
}

std::vector<CompetingBids> ReadRunLogHistory(const fs::path& path,
                                             const BidGrid& grid, int agent) {
  std::ifstream in(path);
  if (!in) throw ScenarioError(path.string(), "cannot be read");
  std::string line;
  if (!std::getline(in, line)) {
    throw ScenarioError(path.string(), "is empty");
  }
  const std::vector<std::string> header = SplitCsvLine(line);
  int agent_col = -1, tie_col = -1;
  std::vector<int> comp_cols;
  for (int i = 0; i < static_cast<int>(header.size()); ++i) {
    if (header[i] == "agent") agent_col = i;
    if (header[i] == "comp_tie") tie_col = i;
    if (header[i].rfind("comp_", 0) == 0 && header[i] != "comp_tie") {
      comp_cols.push_back(i);
    }
  }
  if (agent_col < 0 || tie_col < 0 || comp_cols.empty()) {
    throw ScenarioError(path.string(), "is not a run log");
  }
  std::vector<CompetingBids> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    const std::vector<std::string> cells = SplitCsvLine(line);
    if (cells.size() != header.size()) {
      throw ScenarioError(where, "wrong number of columns");
    }
    if (static_cast<int>(ParseNumber(cells[agent_col], where)) != agent) {
      continue;
    }
    const std::string& ties = cells[tie_col];
    if (ties.size() != comp_cols.size()) {
      throw ScenarioError(where, "comp_tie length mismatch");
    }
    std::vector<int> levels;
    std::vector<std::uint8_t> rival_wins;
    for (std::size_t i = 0; i < comp_cols.size(); ++i) {
      try {
        levels.push_back(grid.LevelOf(ParseNumber(cells[comp_cols[i]], where)));
      } catch (const std::invalid_argument& e) {
        throw ScenarioError(where, e.what());
      }
      if (ties[i] != 'W' && ties[i] != 'L') {
        throw ScenarioError(where, "comp_tie must use W and L");
      }
      rival_wins.push_back(ties[i] == 'L');
    }
    try {
      out.emplace_back(std::move(levels), std::move(rival_wins));
    } catch (const std::invalid_argument& e) {
      throw ScenarioError(where, e.what());
    }
  }
  return out;
}

}  // namespace

ScenarioError::ScenarioError(std::vector<FieldError> errors)
    : std::runtime_error(JoinErrors(errors)), errors_(std::move(errors)) {}

std::string Fnv1aHex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

Scenario ParseScenario(const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ScenarioError("<document>", e.what());
  }
  if (!doc.is_object()) {
    throw ScenarioError("<document>", "must be a JSON object");
  }
  std::vector<FieldError> errors;
  Reader r(errors);
  r.CheckKeys(doc, "",
              {"name", "grid_size", "rounds", "supply", "replications",
               "seed", "time_budget_seconds", "environment", "agents",
               "checkpoints", "output_dir"});
  Scenario s;
  ExperimentConfig& c = s.config;
  if (auto v = r.Get<std::string>(doc, "name", "name", true)) c.name = *v;
  if (auto v = r.Get<int>(doc, "grid_size", "grid_size", true)) {
    c.grid_size = *v;
  }
  if (auto v = r.Get<int>(doc, "rounds", "rounds", true)) c.rounds = *v;
  if (auto v = r.Get<int>(doc, "supply", "supply", true)) c.supply = *v;
  if (auto v = r.Get<int>(doc, "replications", "replications", false)) {
    c.replications = *v;
  }
  if (auto v = r.Get<std::uint64_t>(doc, "seed", "seed", true)) c.seed = *v;
  c.time_budget_seconds = r.Get<double>(doc, "time_budget_seconds",
                                        "time_budget_seconds", false);
  if (auto v = r.Get<std::vector<int>>(doc, "checkpoints", "checkpoints",
                                       false)) {
    c.checkpoints = *v;
  }
  s.output_dir = r.Get<std::string>(doc, "output_dir", "output_dir", false);
  if (doc.contains("environment")) {
    c.environment = ParseEnvironment(r, doc.at("environment"));
  } else {
    r.Fail("environment", "is required");
  }
  if (!doc.contains("agents")) {
    r.Fail("agents", "is required");
  } else if (!doc.at("agents").is_array()) {
    r.Fail("agents", "must be an array");
  } else {
    int n = 0;
    for (const Json& a : doc.at("agents")) {
      c.agents.push_back(
          ParseAgent(r, a, "agents[" + std::to_string(n++) + "]."));
    }
  }
  if (errors.empty()) {
    for (FieldError& e : ValidateExperiment(c)) errors.push_back(std::move(e));
  }
  if (!errors.empty()) throw ScenarioError(std::move(errors));
  s.hash = Fnv1aHex(doc.dump());
  return s;
}

Scenario LoadScenario(const fs::path& path) {
  return ParseScenario(ReadFile(path));
}

fs::path BundledScenarioDir() { return fs::path(PAB_SCENARIO_DIR); }

int CommandRun(const RunOptions& options, std::ostream& out,
               std::ostream& err) {
  Scenario scenario;
  try {
    scenario = LoadScenario(options.scenario);
  } catch (const ScenarioError& e) {
    for (const FieldError& f : e.errors()) {
      err << "invalid scenario: " << f.field << ": " << f.message << "\n";
    }
    return kExitValidation;
  }
  if (options.jobs < 1) {
    err << "invalid option: --jobs must be >= 1\n";
    return kExitValidation;
  }
  std::optional<fs::path> out_dir = options.out_dir;
  if (!out_dir && scenario.output_dir) out_dir = *scenario.output_dir;
  if (!out_dir) {
    err << "invalid option: no output directory (--out or output_dir)\n";
    return kExitValidation;
  }
  ExperimentConfig& config = scenario.config;
  if (options.seed) config.seed = *options.seed;

  const auto start = std::chrono::steady_clock::now();
  try {
    fs::create_directories(*out_dir);
    const BidGrid grid = MakeEvenGrid(config.grid_size);
    const int reps = config.replications;
    std::vector<std::vector<AgentSummary>> summaries(reps);
    std::vector<std::exception_ptr> failures(reps);
    std::atomic<int> next{0};
    auto worker = [&]() {
      for (int r = next++; r < reps; r = next++) {
        try {
          const RunLog log = RunExperiment(config, r);
          std::ostringstream csv;
          WriteRunLogCsv(grid, log, csv);
          WriteAtomically(*out_dir / ReplicationName("run", r, "csv"),
                          csv.str());
          std::string market_csv;
          summaries[r] = Summarize(grid, config, log, r, &market_csv);
          if (!market_csv.empty()) {
            WriteAtomically(*out_dir / ReplicationName("market", r, "csv"),
                            market_csv);
          }
        } catch (...) {
          failures[r] = std::current_exception();
        }
      }
    };
    const int threads = std::min(options.jobs, reps);
    std::vector<std::thread> pool;
    for (int i = 1; i < threads; ++i) pool.emplace_back(worker);
    worker();
    for (std::thread& t : pool) t.join();
    for (const auto& f : failures) {
      if (f) std::rethrow_exception(f);
    }

    std::vector<AgentSummary> rows;
    for (auto& s : summaries) {
      for (auto& row : s) rows.push_back(std::move(row));
    }
    const bool json = options.format == OutputFormat::kJson;
    const std::string metrics_name = json ? "metrics.json" : "metrics.csv";
    WriteAtomically(*out_dir / metrics_name,
                    json ? MetricsJson(grid, rows) : MetricsCsv(grid, rows));

    Json files = Json::array();
    for (int r = 0; r < reps; ++r) {
      files.push_back(ReplicationName("run", r, "csv"));
      if (config.agents.size() > 1) {
        files.push_back(ReplicationName("market", r, "csv"));
      }
    }
    files.push_back(metrics_name);
    const Json manifest = {{"name", config.name},
                           {"config_hash", scenario.hash},
                           {"seed", config.seed},
                           {"replications", reps},
                           {"version", kVersion},
                           {"files", files}};
    WriteAtomically(*out_dir / "manifest.json", manifest.dump(2) + "\n");

    const double elapsed = std::chrono::duration<double>(
                               std::chrono::steady_clock::now() - start)
                               .count();
    double tail = 0.0;
    for (const AgentSummary& s : rows) tail += s.tail_mean_utility;
    out << config.name << ": " << reps << " replication(s), mean last-decile"
        << " utility " << FormatDouble(rows.empty() ? 0.0 : tail / rows.size())
        << ", wrote " << out_dir->string() << "\n";
    if (config.time_budget_seconds && elapsed > *config.time_budget_seconds) {
      err << "warning: run took " << elapsed << " s, over the "
          << *config.time_budget_seconds << " s budget\n";
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

int CommandHindsight(const HindsightOptions& options, std::ostream& out,
                     std::ostream& err) {
  HindsightSolution solution;
  BidGrid grid = MakeEvenGrid(2);
  try {
    if (options.history.has_value() == options.run_log.has_value()) {
      throw ScenarioError("--history/--log", "give exactly one");
    }
    if (options.grid_size < 2) {
      throw ScenarioError("--grid-size", "must be >= 2");
    }
    grid = MakeEvenGrid(options.grid_size);
    std::optional<ValuationProfile> valuation;
    try {
      valuation.emplace(options.valuation);
    } catch (const std::invalid_argument& e) {
      throw ScenarioError("--valuation", e.what());
    }
    const std::vector<CompetingBids> history =
        options.history ? ReadHistoryFile(*options.history, grid)
                        : ReadRunLogHistory(*options.run_log, grid,
                                            options.agent);
    for (const CompetingBids& c : history) {
      if (c.supply() < valuation->units()) {
        throw ScenarioError("--valuation",
                            "more units than competing bids per round");
      }
    }
    solution = HindsightOptimal(
        AccumulateWeights(grid, *valuation, history, options.tie));
  } catch (const ScenarioError& e) {
    for (const FieldError& f : e.errors()) {
      err << "invalid input: " << f.field << ": " << f.message << "\n";
    }
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  if (options.json) {
    Json bid = Json::array();
    for (int b : solution.bid.levels) bid.push_back(grid.value(b));
    out << Json({{"bid", bid}, {"utility", solution.total_utility}}).dump()
        << "\n";
  } else {
    out << "bid: " << BidString(grid, solution.bid, " ") << "\n"
        << "utility: " << FormatDouble(solution.total_utility) << "\n";
  }
  return kExitOk;
}

GridAdvice AdviseGrid(AdviceMode mode, int units, std::int64_t rounds) {
  if (units < 1 || rounds < 1) {
    throw std::invalid_argument("grid advice needs M, T >= 1");
  }
  const double t = static_cast<double>(rounds);
  const double m = units;
  double raw = 0.0;
  switch (mode) {
    case AdviceMode::kFullInfo:
      raw = std::sqrt(t / m);
      break;
    case AdviceMode::kEwBandit:
      raw = std::cbrt(t / m);
      break;
    case AdviceMode::kOmdBandit:
      raw = std::cbrt(t);
      break;
    case AdviceMode::kOmdFullInfo:
      raw = std::sqrt(t);
      break;
  }
  GridAdvice advice;
  advice.grid_size = std::max(2, static_cast<int>(std::ceil(raw - 1e-9)));
  advice.discretization_bound = m * t / advice.grid_size;
  return advice;
}

int CommandGridAdvice(AdviceMode mode, int units, std::int64_t rounds,
                      bool json, std::ostream& out, std::ostream& err) {
  if (units < 1 || rounds < 1) {
    err << "invalid input: --units and --rounds must be >= 1\n";
    return kExitValidation;
  }
  const GridAdvice advice = AdviseGrid(mode, units, rounds);
  if (json) {
    out << Json({{"grid_size", advice.grid_size},
                 {"discretization_bound", advice.discretization_bound}})
               .dump()
        << "\n";
  } else {
    out << "grid_size: " << advice.grid_size << "\n"
        << "discretization_bound: "
        << FormatDouble(advice.discretization_bound) << "\n";
  }
  return kExitOk;
}

}  // namespace pab
