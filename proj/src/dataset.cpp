#include "mlvine/dataset.hpp"

#include "mlvine/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

namespace mlv {

std::string to_string(Scale s) {
  switch (s) {
    case Scale::Continuous: return "continuous";
    case Scale::Discrete: return "discrete";
    case Scale::SemiContinuous: return "semicontinuous";
  }
  return "continuous";
}

Scale parse_scale(const std::string& s) {
  if (s == "continuous") return Scale::Continuous;
  if (s == "discrete") return Scale::Discrete;
  if (s == "semicontinuous") return Scale::SemiContinuous;
  throw std::invalid_argument("unknown scale '" + s + "'");
}

std::string format_real(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

PanelDataset::PanelDataset(std::vector<std::string> subjects, std::vector<std::string> outcomes,
                           int periods, std::vector<std::string> covariates, int first_period)
    : subjects_(std::move(subjects)),
      outcomes_(std::move(outcomes)),
      covariates_(std::move(covariates)),
      periods_(periods),
      first_period_(first_period) {
  if (periods_ < 1) throw DataError("panel needs at least one period");
  const Eigen::Index cells = static_cast<Eigen::Index>(subjects_.size()) *
                             static_cast<Eigen::Index>(outcomes_.size()) * periods_;
  values_ = Eigen::VectorXd::Zero(cells);
  x_ = Eigen::MatrixXd::Zero(cells, static_cast<Eigen::Index>(covariates_.size()));
}

int PanelDataset::outcome_index(const std::string& name) const {
  const auto it = std::find(outcomes_.begin(), outcomes_.end(), name);
  if (it == outcomes_.end()) throw DataError("outcome '" + name + "' not present in data");
  return static_cast<int>(it - outcomes_.begin());
}

int PanelDataset::subject_index(const std::string& name) const {
  const auto it = std::find(subjects_.begin(), subjects_.end(), name);
  if (it == subjects_.end()) throw DataError("subject '" + name + "' not present in data");
  return static_cast<int>(it - subjects_.begin());
}

PanelDataset PanelDataset::slice_periods(int first, int count) const {
  if (first < 0 || count < 1 || first + count > periods_)
    throw std::out_of_range("slice_periods: period range outside the panel");
  PanelDataset out(subjects_, outcomes_, count, covariates_, first_period_ + first);
  for (int i = 0; i < n_subjects(); ++i)
    for (int j = 0; j < n_outcomes(); ++j)
      for (int t = 0; t < count; ++t) {
        out.value(i, j, t) = value(i, j, first + t);
        out.covariates(i, j, t) = covariates(i, j, first + t);
      }
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  for (auto& f : out) {
    const auto b = f.find_first_not_of(" \t\r");
    const auto e = f.find_last_not_of(" \t\r");
    f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
  }
  return out;
}

double parse_number(const std::string& s, int line, const std::string& column) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v))
    throw DataError("line " + std::to_string(line) + ": column '" + column +
                    "' is not a finite number: '" + s + "'");
  return v;
}

struct RawRow {
  int line;
  std::string subject, outcome;
  int period;
  double value;
  std::vector<double> x;
};

}  // namespace

PanelDataset read_panel_csv(std::istream& in) {
  std::string line;
  int line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    header = split_csv_line(line);
    break;
  }
  static const std::vector<std::string> required = {"subject_id", "outcome_id", "period", "value"};
  if (header.size() < required.size() || !std::equal(required.begin(), required.end(), header.begin()))
    throw DataError("line " + std::to_string(line_no) +
                    ": header must start with subject_id,outcome_id,period,value");
  const std::vector<std::string> covariates(header.begin() + 4, header.end());

  std::vector<RawRow> rows;
  std::vector<std::string> subjects, outcomes;
  std::unordered_map<std::string, int> subject_seen, outcome_seen;
  int pmin = 0, pmax = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto f = split_csv_line(line);
    if (f.size() != header.size())
      throw DataError("line " + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " fields, found " + std::to_string(f.size()));
    RawRow r;
    r.line = line_no;
    r.subject = f[0];
    r.outcome = f[1];
    if (r.subject.empty() || r.outcome.empty())
      throw DataError("line " + std::to_string(line_no) + ": empty subject_id or outcome_id");
    const double p = parse_number(f[2], line_no, "period");
    if (p != std::floor(p) || p < 1)
      throw DataError("line " + std::to_string(line_no) + ": period must be an integer >= 1");
    r.period = static_cast<int>(p);
    r.value = parse_number(f[3], line_no, "value");
    for (std::size_t k = 4; k < f.size(); ++k) r.x.push_back(parse_number(f[k], line_no, header[k]));
    if (subject_seen.emplace(r.subject, static_cast<int>(subjects.size())).second)
      subjects.push_back(r.subject);
    if (outcome_seen.emplace(r.outcome, static_cast<int>(outcomes.size())).second)
      outcomes.push_back(r.outcome);
    if (rows.empty()) pmin = pmax = r.period;
    pmin = std::min(pmin, r.period);
    pmax = std::max(pmax, r.period);
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw DataError("data file contains no observations");

  const int periods = pmax - pmin + 1;
  PanelDataset data(subjects, outcomes, periods, covariates, pmin);
  std::vector<int> filled(static_cast<std::size_t>(data.n_subjects()) * data.n_outcomes() * periods, 0);
  for (const auto& r : rows) {
    const int i = subject_seen.at(r.subject), j = outcome_seen.at(r.outcome), t = r.period - pmin;
    auto& slot = filled[(static_cast<std::size_t>(i) * data.n_outcomes() + j) * periods + t];
    if (slot != 0)
      throw DataError("line " + std::to_string(r.line) + ": duplicate observation for subject '" +
                      r.subject + "', outcome '" + r.outcome + "', period " +
                      std::to_string(r.period) + " (first seen on line " + std::to_string(slot) + ")");
    slot = r.line;
    data.value(i, j, t) = r.value;
    for (std::size_t k = 0; k < r.x.size(); ++k) data.covariates(i, j, t)(static_cast<Eigen::Index>(k)) = r.x[k];
  }
  for (int i = 0; i < data.n_subjects(); ++i)
    for (int j = 0; j < data.n_outcomes(); ++j)
      for (int t = 0; t < periods; ++t)
        if (filled[(static_cast<std::size_t>(i) * data.n_outcomes() + j) * periods + t] == 0)
          throw DataError("unbalanced panel: subject '" + subjects[i] + "' has no observation for outcome '" +
                          outcomes[j] + "' in period " + std::to_string(pmin + t));
  return data;
}

PanelDataset read_panel_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open data file '" + path + "'");
  return read_panel_csv(in);
}

void write_panel_csv(std::ostream& out, const PanelDataset& data) {
  out << "subject_id,outcome_id,period,value";
  for (const auto& c : data.covariate_names()) out << ',' << c;
  out << '\n';
  for (int i = 0; i < data.n_subjects(); ++i)
    for (int t = 0; t < data.n_periods(); ++t)
      for (int j = 0; j < data.n_outcomes(); ++j) {
        out << data.subjects()[i] << ',' << data.outcomes()[j] << ',' << data.first_period() + t << ','
            << format_real(data.value(i, j, t));
        const auto x = data.covariates(i, j, t);
        for (Eigen::Index k = 0; k < x.size(); ++k) out << ',' << format_real(x(k));
        out << '\n';
      }
}

void validate_scales(const PanelDataset& data, const std::vector<Scale>& scales) {
  if (static_cast<int>(scales.size()) != data.n_outcomes())
    throw DataError("expected " + std::to_string(scales.size()) + " outcomes, data has " +
                    std::to_string(data.n_outcomes()));
  for (int i = 0; i < data.n_subjects(); ++i)
    for (int j = 0; j < data.n_outcomes(); ++j)
      for (int t = 0; t < data.n_periods(); ++t) {
        const double y = data.value(i, j, t);
        const auto where = [&] {
          return "subject '" + data.subjects()[i] + "', outcome '" + data.outcomes()[j] + "', period " +
                 std::to_string(data.first_period() + t);
        };
        if (scales[j] == Scale::Continuous) {
          if (!(y > 0.0)) throw DataError(where() + ": continuous outcome must be positive");
        } else if (y < 0.0) {
          throw DataError(where() + ": value must be nonnegative");
        }
        if (scales[j] == Scale::Discrete && y != std::floor(y))
          throw DataError(where() + ": count outcome must be integral");
      }
}

}  // namespace mlv
