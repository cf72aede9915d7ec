#include "bench/plots.hpp"

#include <cctype>
#include <cstdio>
#include <filesystem>
#include <map>

#include "common/error.hpp"
#include "data/csv.hpp"

namespace clinbench::bench {

using nlohmann::json;

namespace {

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
constexpr double kSvgWidth = 600, kSvgHeight = 400;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string header(const std::string& title) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(kSvgWidth) + "\" height=\"" + fmt(kSvgHeight) +
         "\" viewBox=\"0 0 " + fmt(kSvgWidth) + " " + fmt(kSvgHeight) + "\" font-family=\"sans-serif\" font-size=\"11\">\n" +
         "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n<text x=\"" + fmt(kSvgWidth / 2) +
         "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">" + xml_escape(title) + "</text>\n";
}

std::string axes(const PlotFrame& f, const std::string& xlabel, const std::string& ylabel) {
  std::string s = "<rect x=\"" + fmt(f.left) + "\" y=\"" + fmt(f.top) + "\" width=\"" + fmt(f.width) + "\" height=\"" +
                  fmt(f.height) + "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = f.x_max * i / 4.0, fy = i / 4.0;
    const auto [x, yb] = to_svg(f, fx, 0);
    const auto [xl, y] = to_svg(f, 0, fy);
    char xt[32];
    std::snprintf(xt, sizeof xt, "%.3g", fx);
    s += "<text x=\"" + fmt(x) + "\" y=\"" + fmt(yb + 14) + "\" text-anchor=\"middle\">" + xt + "</text>\n";
    s += "<text x=\"" + fmt(xl - 4) + "\" y=\"" + fmt(y + 4) + "\" text-anchor=\"end\">" + fmt(fy) + "</text>\n";
  }
  s += "<text x=\"" + fmt(f.left + f.width / 2) + "\" y=\"" + fmt(f.top + f.height + 30) + "\" text-anchor=\"middle\">" +
       xml_escape(xlabel) + "</text>\n";
  s += "<text transform=\"translate(" + fmt(f.left - 40) + "," + fmt(f.top + f.height / 2) +
       ") rotate(-90)\" text-anchor=\"middle\">" + xml_escape(ylabel) + "</text>\n";
  return s;
}

std::string polyline(const PlotFrame& f, const std::vector<std::pair<double, double>>& pts, const char* colour,
                     bool dashed) {
  std::string s = "<polyline fill=\"none\" stroke=\"" + std::string(colour) + "\" stroke-width=\"1.5\"";
  if (dashed) s += " stroke-dasharray=\"5,3\"";
  s += " points=\"";
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto [x, y] = to_svg(f, pts[i].first, pts[i].second);
    s += (i ? " " : "") + fmt(x) + "," + fmt(y);
  }
  return s + "\"/>\n";
}

std::string render(const std::string& title, const std::vector<Series>& series, const PlotFrame& f,
                   const std::string& xlabel, const std::string& ylabel, bool diagonal) {
  std::string s = header(title) + axes(f, xlabel, ylabel);
  if (diagonal) s += polyline(f, {{0, 0}, {1, 1}}, "#bbbbbb", true);
  const double lx = f.left + f.width + 20;
  for (std::size_t i = 0; i < series.size(); ++i) {
    const Series& ser = series[i];
    const char* colour = kPalette[i % std::size(kPalette)];
    if (ser.points && !ser.points->empty()) s += polyline(f, *ser.points, colour, ser.dashed);
    const double ly = f.top + 10 + 18.0 * static_cast<double>(i);
    const bool empty = !ser.points || ser.points->empty();
    s += "<line x1=\"" + fmt(lx) + "\" y1=\"" + fmt(ly) + "\" x2=\"" + fmt(lx + 20) + "\" y2=\"" + fmt(ly) +
         "\" stroke=\"" + (empty ? std::string("#cccccc") : std::string(colour)) + "\" stroke-width=\"1.5\"" +
         (ser.dashed ? " stroke-dasharray=\"5,3\"" : "") + "/>\n";
    s += "<text x=\"" + fmt(lx + 26) + "\" y=\"" + fmt(ly + 4) + "\">" + xml_escape(ser.label) +
         (empty ? " (n/a)" : "") + "</text>\n";
  }
  return s + "</svg>\n";
}

std::string safe_name(const std::string& s) {
  std::string out;
  for (unsigned char c : s) out += std::isalnum(c) || c == '-' || c == '.' ? static_cast<char>(c) : '_';
  return out.empty() ? "_" : out;
}

struct PendingFile {
  std::string path;
  std::string contents;
};

}  // namespace

std::string xml_escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

std::pair<double, double> to_svg(const PlotFrame& f, double x, double y) {
  return {f.left + f.width * (x / f.x_max), f.top + f.height * (1.0 - y)};
}

std::string roc_svg(const std::string& title, const std::vector<Series>& series) {
  return render(title, series, PlotFrame{}, "False positive rate", "True positive rate", true);
}

std::string km_svg(const std::string& title, const std::vector<Series>& series) {
  PlotFrame f;
  double t_max = 0.0;
  for (const auto& s : series)
    if (s.points)
      for (const auto& p : *s.points) t_max = std::max(t_max, p.first);
  f.x_max = t_max > 0 ? t_max : 1.0;
  return render(title, series, f, "Time", "Survival probability", false);
}

std::vector<std::pair<double, double>> km_steps(const json& curve) {
  std::vector<std::pair<double, double>> pts{{0.0, 1.0}};
  const auto& times = curve.at("times");
  const auto& surv = curve.at("survival");
  double prev = 1.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double t = times[i].get<double>(), s = surv[i].get<double>();
    pts.push_back({t, prev});
    pts.push_back({t, s});
    prev = s;
  }
  return pts;
}

std::vector<std::string> emit_plots(const json& report, const std::string& dir) {
  std::vector<PendingFile> files;
  try {
    // ROC: one plot per model, a line per group.
    std::map<std::string, std::vector<const json*>> roc_by_model;
    std::vector<std::string> model_order;
    for (const auto& e : report.at("curves").at("roc")) {
      const auto m = e.at("model").get<std::string>();
      if (!roc_by_model.count(m)) model_order.push_back(m);
      roc_by_model[m].push_back(&e);
    }
    for (const auto& m : model_order) {
      std::vector<Series> series;
      data::RawTable csv;
      csv.header = {"group", "series", "x", "y", "at_risk"};
      std::string k;
      for (const json* e : roc_by_model[m]) {
        k = e->at("k").get<std::string>();
        Series s;
        const auto group = e->at("group").get<std::string>();
        s.label = group;
        const json& roc = e->at("roc");
        if (!roc.is_null()) {
          char auc[32];
          std::snprintf(auc, sizeof auc, " (AUC %.3f)", roc.at("auc").get<double>());
          s.label += auc;
          std::vector<std::pair<double, double>> pts;
          for (std::size_t i = 0; i < roc.at("fpr").size(); ++i) {
            pts.push_back({roc["fpr"][i].get<double>(), roc["tpr"][i].get<double>()});
            csv.rows.push_back({group, "roc", data::format_number(pts.back().first),
                            data::format_number(pts.back().second), ""});
          }
          s.points = std::move(pts);
        }
        series.push_back(std::move(s));
      }
      const std::string base = (std::filesystem::path(dir) / ("roc_" + safe_name(m))).string();
      files.push_back({base + ".svg", roc_svg("ROC: " + m + " (k=" + k + ")", series)});
      files.push_back({base + ".csv", data::format_csv(csv)});
    }

    // KM: predicted responder / non-responder, observed groups dashed.
    const std::pair<const char*, const char*> kinds[] = {{"predicted_responders", "predicted responders"},
                                                         {"predicted_nonresponders", "predicted non-responders"},
                                                         {"observed_responders", "observed responders"},
                                                         {"observed_nonresponders", "observed non-responders"}};
    for (const auto& e : report.at("curves").at("km")) {
      const auto m = e.at("model").get<std::string>();
      const auto group = e.at("group").get<std::string>();
      const auto endpoint = e.at("endpoint").get<std::string>();
      std::vector<Series> series;
      data::RawTable csv;
      csv.header = {"group", "series", "x", "y", "at_risk"};
      for (const auto& [key, label] : kinds) {
        Series s;
        s.label = label;
        s.dashed = std::string(key).rfind("observed", 0) == 0;
        const json& curve = e.at("series").at(key);
        if (!curve.is_null()) {
          s.points = km_steps(curve);
          csv.rows.push_back({group, key, "0", "1", std::to_string(curve.at("n").get<std::size_t>())});
          for (std::size_t i = 0; i < curve.at("times").size(); ++i)
            csv.rows.push_back({group, key, data::format_number(curve["times"][i].get<double>()),
                            data::format_number(curve["survival"][i].get<double>()),
                            std::to_string(curve["at_risk"][i].get<std::size_t>())});
        }
        series.push_back(std::move(s));
      }
      std::string title = (endpoint == "os" ? "OS" : "PFS");
      title += " Kaplan-Meier: " + m + ", " + group;
      const std::string base =
          (std::filesystem::path(dir) / ("km_" + safe_name(m) + "_" + safe_name(group) + "_" + endpoint)).string();
      files.push_back({base + ".svg", km_svg(title, series)});
      files.push_back({base + ".csv", data::format_csv(csv)});
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, std::string("report has no usable curves: ") + e.what());
  }

  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  require(!ec, ErrorKind::Io, "cannot create plot directory " + dir + ": " + ec.message());
  std::vector<std::string> written;
  for (const auto& f : files) {
    data::write_text_file_atomic(f.path, f.contents);
    written.push_back(f.path);
  }
  return written;
}

}  // namespace clinbench::bench
