#include <ostream>

#include <json.hpp>

#include "pinn/solver.hpp"

namespace pinn::solver {

bool same_trajectory(const TrainingHistory& a, const TrainingHistory& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].iteration != b[i].iteration || !(a[i].loss == b[i].loss) ||
        a[i].params != b[i].params) {
      return false;
    }
  }
  return true;
}

void write_jsonl(std::ostream& out, const TrainingHistory& history) {
  for (const HistoryRecord& r : history) {
    nlohmann::ordered_json line;
    line["iteration"] = r.iteration;
    line["l_s"] = r.loss.l_s;
    line["l_r"] = r.loss.l_r;
    line["l_b"] = r.loss.l_b;
    line["l_0"] = r.loss.l_0;
    line["total"] = r.loss.total;
    nlohmann::ordered_json params = nlohmann::ordered_json::object();
    for (const auto& [name, value] : r.params) params[name] = value;
    line["params"] = std::move(params);
    line["millis"] = r.millis;
    out << line.dump() << '\n';
  }
}

}  // namespace pinn::solver
