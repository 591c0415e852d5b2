#include "fgpac/report.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <stdexcept>

namespace fgpac {

nlohmann::json to_json(const BoundReport& r) {
  nlohmann::json j;
  j["schema_version"] = r.schema_version;
  j["family"] = std::string(to_string(r.family));
  j["posterior"] = std::string(to_string(r.posterior));
  j["m"] = r.m;
  j["delta"] = r.delta;
  j["delta_ledger"] = nlohmann::json::array();
  for (const auto& e : r.delta_ledger) {
    j["delta_ledger"].push_back({{"purpose", e.purpose}, {"share", e.share}});
  }
  j["terms"] = r.terms;
  j["value"] = r.value;
  j["provenance"] = r.provenance;
  j["notes"] = r.notes;
  j["created_at"] = r.created_at.empty() ? utc_timestamp() : r.created_at;
  return j;
}

BoundReport report_from_json(const nlohmann::json& j) {
  BoundReport r;
  r.schema_version = j.at("schema_version").get<int>();
  r.family = parse_family(j.at("family").get<std::string>());
  r.posterior = parse_posterior_kind(j.at("posterior").get<std::string>());
  r.m = j.at("m").get<std::size_t>();
  r.delta = j.at("delta").get<double>();
  for (const auto& e : j.at("delta_ledger")) {
    r.delta_ledger.push_back({e.at("purpose").get<std::string>(), e.at("share").get<double>()});
  }
  r.terms = j.at("terms").get<std::map<std::string, double>>();
  r.value = j.at("value").get<double>();
  if (j.contains("provenance")) {
    r.provenance = j.at("provenance").get<std::map<std::string, std::string>>();
  }
  if (j.contains("notes")) r.notes = j.at("notes").get<std::vector<std::string>>();
  if (j.contains("created_at")) r.created_at = j.at("created_at").get<std::string>();
  return r;
}

nlohmann::json to_json(const LipschitzEstimate& est) {
  nlohmann::json j;
  j["surrogate"] = est.surrogate;
  j["loss_lipschitz"] = est.loss_lip;
  j["m"] = est.m;
  j["delta"] = est.delta;
  j["value"] = est.value;
  j["trace"] = nlohmann::json::array();
  for (const auto& [it, v] : est.trace) j["trace"].push_back({{"iteration", it}, {"surrogate", v}});
  return j;
}

LipschitzEstimate lipschitz_from_json(const nlohmann::json& j) {
  LipschitzEstimate est;
  est.surrogate = j.at("surrogate").get<double>();
  est.loss_lip = j.at("loss_lipschitz").get<double>();
  est.m = j.at("m").get<std::size_t>();
  est.delta = j.at("delta").get<double>();
  est.value = j.at("value").get<double>();
  if (j.contains("trace")) {
    for (const auto& e : j.at("trace")) {
      est.trace.emplace_back(e.at("iteration").get<std::size_t>(), e.at("surrogate").get<double>());
    }
  }
  return est;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return nlohmann::json::parse(in);
}

}  // namespace fgpac
