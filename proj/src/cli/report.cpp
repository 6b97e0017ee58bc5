#include "aliascope/cli/report.hpp"

#include <charconv>
#include <sstream>

#include "aliascope/binary_io.hpp"
#include "aliascope/nn/checkpoint.hpp"

namespace aliascope::cli {

namespace {

constexpr Category kCategories[] = {Category::NoPass, Category::NonAliased, Category::Aliased,
                                    Category::AliasedTangled};

nlohmann::json dataset_json(const DatasetSpec& d) {
  return {{"n_freqs", d.n_freqs},       {"size", d.size}, {"count", d.count},
          {"noise_amplitude", d.noise_amplitude}, {"seed", d.seed}};
}

DatasetSpec dataset_from_json(const nlohmann::json& j) {
  DatasetSpec d;
  d.n_freqs = j.at("n_freqs").get<std::uint32_t>();
  d.size = j.at("size").get<std::uint32_t>();
  d.count = j.at("count").get<std::uint32_t>();
  d.noise_amplitude = j.at("noise_amplitude").get<double>();
  d.seed = j.at("seed").get<std::uint64_t>();
  return d;
}

CategoryCounts counts_from_json(const nlohmann::json& j) {
  CategoryCounts c;
  for (Category k : kCategories) c[k] = j.at(std::string(category_name(k))).get<std::uint64_t>();
  return c;
}

nlohmann::json group_json(const CorrectnessGroup& g) {
  nlohmann::json cats = nlohmann::json::object();
  for (std::size_t k = 0; k < kCategoryCount; ++k) {
    const auto& s = g.categories[k];
    cats[std::string(category_name(kCategories[k]))] = {
        {"mean", s.mean}, {"median", s.median}, {"p1", s.p1}, {"p99", s.p99}};
  }
  return {{"count", g.count}, {"fractions", cats}};
}

nn::PointPath path_from_name(const std::string& name) {
  if (name == "0") return nn::PointPath::Stem;
  if (name == "m") return nn::PointPath::Pool;
  return !name.empty() && name[0] == '*' ? nn::PointPath::Skip : nn::PointPath::Main;
}

}  // namespace

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

nlohmann::json fractions_json(const Fractions& f) {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t k = 0; k < kCategoryCount; ++k) j[std::string(category_name(kCategories[k]))] = f[k];
  return j;
}

nlohmann::json counts_json(const CategoryCounts& c) {
  nlohmann::json j = nlohmann::json::object();
  for (Category k : kCategories) j[std::string(category_name(k))] = c[k];
  j["total"] = c.total();
  return j;
}

nlohmann::json report_to_json(const AnalysisReport& report) {
  nlohmann::json points = nlohmann::json::array();
  for (const auto& p : report.points) {
    nlohmann::json per_channel = nlohmann::json::array();
    for (const auto& c : p.per_channel) per_channel.push_back(counts_json(c));
    points.push_back({{"name", p.point.name},
                      {"stage", p.point.stage},
                      {"r", p.factor},
                      {"counts", counts_json(p.pooled)},
                      {"fractions", fractions_json(p.fractions())},
                      {"per_channel_counts", per_channel}});
  }
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& s : report.samples) {
    nlohmann::json per_point = nlohmann::json::array();
    nlohmann::json per_point_counts = nlohmann::json::array();
    for (const auto& c : s.per_point) {
      per_point.push_back(fractions_json(fractions_of(c)));
      per_point_counts.push_back(counts_json(c));
    }
    nlohmann::json record = {{"index", s.index},
                             {"label", s.label},
                             {"correct", s.correct},
                             {"correct_top5", s.correct_top5},
                             {"per_point_fractions", per_point},
                             {"per_point_counts", per_point_counts}};
    if (!s.per_point.empty()) record["pooled_fractions"] = fractions_json(fractions_of(s.pooled()));
    samples.push_back(std::move(record));
  }
  const auto [correct, incorrect] = split_by_correctness(report);
  return {{"version", kReportSchemaVersion},
          {"model", nn::to_json(report.model)},
          {"dataset", dataset_json(report.dataset)},
          {"divisor", report.divisor},
          {"threshold_scope", "per-channel"},
          {"accuracy", {{"top1", report.top1}, {"top5", report.top5}, {"top5_k", report.top5_k}}},
          {"points", points},
          {"outer_equal_weight", report.outer ? fractions_json(*report.outer) : nlohmann::json(nullptr)},
          {"correctness_split", {{"correct", group_json(correct)}, {"incorrect", group_json(incorrect)}}},
          {"samples", samples}};
}

AnalysisReport report_from_json(const nlohmann::json& j) {
  if (!j.contains("version") || !j.at("version").is_number_integer()) {
    throw FormatError("report has no integer schema version");
  }
  const int version = j.at("version").get<int>();
  if (version != kReportSchemaVersion) {
    throw FormatError("unsupported report schema version " + std::to_string(version));
  }
  AnalysisReport r;
  r.model = nn::model_spec_from_json(j.at("model"));
  r.dataset = dataset_from_json(j.at("dataset"));
  r.divisor = j.at("divisor").get<double>();
  r.top1 = j.at("accuracy").at("top1").get<double>();
  r.top5 = j.at("accuracy").at("top5").get<double>();
  r.top5_k = j.at("accuracy").at("top5_k").get<std::size_t>();
  for (const auto& p : j.at("points")) {
    PointReport pr;
    pr.point.name = p.at("name").get<std::string>();
    pr.point.stage = p.at("stage").get<std::size_t>();
    pr.point.path = path_from_name(pr.point.name);
    pr.factor = p.at("r").get<std::size_t>();
    pr.pooled = counts_from_json(p.at("counts"));
    for (const auto& c : p.at("per_channel_counts")) pr.per_channel.push_back(counts_from_json(c));
    r.points.push_back(std::move(pr));
  }
  if (!j.at("outer_equal_weight").is_null()) {
    Fractions f{};
    for (std::size_t k = 0; k < kCategoryCount; ++k) {
      f[k] = j.at("outer_equal_weight").at(std::string(category_name(kCategories[k]))).get<double>();
    }
    r.outer = f;
  }
  for (const auto& s : j.at("samples")) {
    SampleRecord rec;
    rec.index = s.at("index").get<std::size_t>();
    rec.label = s.at("label").get<std::uint32_t>();
    rec.correct = s.at("correct").get<bool>();
    rec.correct_top5 = s.at("correct_top5").get<bool>();
    for (const auto& c : s.at("per_point_counts")) rec.per_point.push_back(counts_from_json(c));
    r.samples.push_back(std::move(rec));
  }
  return r;
}

std::string points_csv(const AnalysisReport& report) {
  std::ostringstream out;
  out << "point,r,no_pass,non_aliased,aliased,aliased_tangled,total,"
         "frac_no_pass,frac_non_aliased,frac_aliased,frac_aliased_tangled\n";
  for (const auto& p : report.points) {
    const Fractions f = p.fractions();
    out << p.point.name << ',' << p.factor << ',' << p.pooled.no_pass << ',' << p.pooled.non_aliased << ','
        << p.pooled.aliased << ',' << p.pooled.aliased_tangled << ',' << p.pooled.total();
    for (double v : f) out << ',' << format_number(v);
    out << '\n';
  }
  if (report.outer) {
    out << "outer_equal_weight,,,,,,";
    for (double v : *report.outer) out << ',' << format_number(v);
    out << '\n';
  }
  return out.str();
}

std::string samples_csv(const AnalysisReport& report) {
  std::ostringstream out;
  out << "index,label,correct,correct_top5,point,frac_no_pass,frac_non_aliased,frac_aliased,frac_aliased_tangled\n";
  auto row = [&](const SampleRecord& s, const std::string& point, const CategoryCounts& c) {
    out << s.index << ',' << s.label << ',' << (s.correct ? 1 : 0) << ',' << (s.correct_top5 ? 1 : 0) << ','
        << point;
    for (double v : fractions_of(c)) out << ',' << format_number(v);
    out << '\n';
  };
  for (const auto& s : report.samples) {
    for (std::size_t p = 0; p < s.per_point.size(); ++p) row(s, report.points[p].point.name, s.per_point[p]);
    if (!s.per_point.empty()) row(s, "all", s.pooled());
  }
  return out.str();
}

std::string sweep_csv(const SweepTable& table) {
  std::ostringstream out;
  out << "epsilon,top1,top5,max_perturbation";
  for (const auto& name : table.point_names) out << ',' << name << "_median," << name << "_p1," << name << "_p99";
  if (!table.point_names.empty()) out << ",all_median,all_p1,all_p99";
  out << '\n';
  for (const auto& row : table.rows) {
    out << format_number(row.epsilon) << ',' << format_number(row.top1) << ',' << format_number(row.top5) << ','
        << format_number(row.max_perturbation);
    for (const auto& b : row.per_point) {
      out << ',' << format_number(b.median) << ',' << format_number(b.p1) << ',' << format_number(b.p99);
    }
    if (!table.point_names.empty()) {
      out << ',' << format_number(row.overall.median) << ',' << format_number(row.overall.p1) << ','
          << format_number(row.overall.p99);
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace aliascope::cli
