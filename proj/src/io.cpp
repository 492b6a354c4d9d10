#include "nvesr/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cerrno>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace nvesr::io {

namespace fs = std::filesystem;
using nlohmann::json;

FormatError::FormatError(const std::string& file, std::size_t row, const std::string& what)
    : IoError(file + ": row " + std::to_string(row) + ": " + what), row_(row) {}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.8e", v);
  return buf;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string join(const std::vector<std::string>& cells) {
  std::string s;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) s += ',';
    s += cells[i];
  }
  return s;
}

json read_json(const fs::path& path) {
  const auto text = read_text(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

template <class T>
T json_get(const json& j, const char* key, T fallback, const fs::path& path) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw IoError(path.string() + ": field '" + key + "' has the wrong type");
  }
}

}  // namespace

CsvTable read_csv(const fs::path& path, const std::vector<std::string>& expected_header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string name = path.string();

  CsvTable table;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (row == 1) {
      table.header = split(line);
      if (table.header != expected_header)
        throw FormatError(name, row, "expected header '" + join(expected_header) + "', found '" + line + "'");
      continue;
    }
    if (trim(line).empty()) continue;
    const auto cells = split(line);
    if (cells.size() != expected_header.size())
      throw FormatError(name, row, "expected " + std::to_string(expected_header.size()) + " columns, found " +
                                       std::to_string(cells.size()));
    std::vector<double> values(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const char* begin = cells[c].c_str();
      char* end = nullptr;
      errno = 0;
      values[c] = std::strtod(begin, &end);
      if (cells[c].empty() || end != begin + cells[c].size() || errno == ERANGE || !std::isfinite(values[c]))
        throw FormatError(name, row, "column '" + expected_header[c] + "' is not a finite number: '" + cells[c] + "'");
    }
    table.rows.push_back(std::move(values));
  }
  if (row == 0) throw FormatError(name, 1, "empty file");
  return table;
}

void write_csv(const fs::path& path, const CsvTable& table) {
  std::string text = join(table.header) + "\n";
  for (const auto& r : table.rows) {
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (c) text += ',';
      text += format_number(r[c]);
    }
    text += '\n';
  }
  write_text(path, text);
}

fs::path sidecar_path(const fs::path& csv_path) {
  auto p = csv_path;
  p.replace_extension(".json");
  return p;
}

void write_record(const fs::path& csv_path, const forward::MeasurementRecord& record) {
  record.validate();
  CsvTable t{{"field_G", "time_s", "contrast"}, {}};
  t.rows.reserve(record.sweep.size() * record.times.size());
  for (const auto& curve : record.curves)
    for (std::size_t j = 0; j < record.times.size(); ++j) t.rows.push_back({curve.field_gauss, record.times[j], curve.contrast[j]});
  write_csv(csv_path, t);

  json side;
  side["phonon_rate_hz"] = record.phonon_rate_r;
  side["noise_sigma"] = record.noise_sigma;
  side["seed"] = record.seed;
  side["field_points"] = record.sweep.size();
  side["time_points"] = record.times.size();
  side["field_min_G"] = record.sweep.size() ? record.sweep.values().front() : 0.0;
  side["field_max_G"] = record.sweep.size() ? record.sweep.values().back() : 0.0;
  side["time_min_s"] = record.times.size() ? record.times.values().front() : 0.0;
  side["time_max_s"] = record.times.size() ? record.times.values().back() : 0.0;
  write_text(sidecar_path(csv_path), side.dump(2) + "\n");
}

forward::MeasurementRecord read_record(const fs::path& csv_path) {
  const auto t = read_csv(csv_path, {"field_G", "time_s", "contrast"});
  const std::string name = csv_path.string();
  if (t.rows.empty()) throw FormatError(name, 2, "no data rows");

  std::vector<double> fields;
  std::vector<double> times;
  std::vector<std::vector<double>> contrast;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    if (fields.empty() || row[0] != fields.back()) {
      if (!fields.empty() && contrast.back().size() != times.size())
        throw FormatError(name, r + 2, "field " + format_number(fields.back()) + " has an incomplete time grid");
      fields.push_back(row[0]);
      contrast.emplace_back();
    }
    const std::size_t j = contrast.back().size();
    if (fields.size() == 1) {
      times.push_back(row[1]);
    } else if (j >= times.size() || row[1] != times[j]) {
      throw FormatError(name, r + 2, "time grid differs from the first field");
    }
    contrast.back().push_back(row[2]);
  }
  if (contrast.back().size() != times.size())
    throw FormatError(name, t.rows.size() + 1, "last field has an incomplete time grid");

  forward::MeasurementRecord rec;
  try {
    rec.sweep = FieldSweep(fields);
    rec.times = TimeGrid(times);
  } catch (const std::invalid_argument& e) {
    throw FormatError(name, 2, e.what());
  }
  rec.phonon_rate_r = forward::kDefaultPhononRate;
  const auto side = sidecar_path(csv_path);
  if (fs::exists(side)) {
    const auto j = read_json(side);
    rec.phonon_rate_r = json_get(j, "phonon_rate_hz", rec.phonon_rate_r, side);
    rec.noise_sigma = json_get(j, "noise_sigma", 0.0, side);
    rec.seed = json_get<std::uint64_t>(j, "seed", 0, side);
  }
  rec.curves.resize(fields.size());
  for (std::size_t i = 0; i < fields.size(); ++i)
    rec.curves[i] = DecayCurve{fields[i], std::move(contrast[i]), rec.noise_sigma};
  rec.validate();
  return rec;
}

void write_rates(const fs::path& csv_path, const forward::RateProfile& p) {
  CsvTable t{{"field_G", "gamma1_hz", "stderr"}, {}};
  for (std::size_t i = 0; i < p.sweep.size(); ++i) t.rows.push_back({p.sweep[i], p.gamma1[i], p.gamma1_stderr[i]});
  write_csv(csv_path, t);

  json side;
  side["r_mode"] = p.r_mode == forward::RMode::Fixed ? "fixed" : "fitted";
  side["phonon_rate_hz"] = p.r_fitted;
  side["phonon_rate_stderr_hz"] = p.r_stderr;
  side["baseline_offset_hz"] = p.baseline_offset;
  side["failed_points"] = p.failed_points();
  std::vector<std::size_t> failed;
  for (std::size_t i = 0; i < p.converged.size(); ++i)
    if (!p.converged[i]) failed.push_back(i);
  side["failed_indices"] = failed;
  write_text(sidecar_path(csv_path), side.dump(2) + "\n");
}

forward::RateProfile read_rates(const fs::path& csv_path) {
  const auto t = read_csv(csv_path, {"field_G", "gamma1_hz", "stderr"});
  const std::string name = csv_path.string();
  forward::RateProfile p;
  std::vector<double> fields;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    if (row[1] < 0 || row[2] < 0) throw FormatError(name, r + 2, "rates and errors must be >= 0");
    if (!fields.empty() && !(row[0] > fields.back())) throw FormatError(name, r + 2, "fields must increase");
    fields.push_back(row[0]);
    p.gamma1.push_back(row[1]);
    p.gamma1_stderr.push_back(row[2]);
  }
  if (fields.empty()) throw FormatError(name, 2, "no data rows");
  try {
    p.sweep = FieldSweep(fields);
  } catch (const std::invalid_argument& e) {
    throw FormatError(name, 2, e.what());
  }
  p.converged.assign(fields.size(), true);
  const auto side = sidecar_path(csv_path);
  if (fs::exists(side)) {
    const auto j = read_json(side);
    p.r_mode = json_get<std::string>(j, "r_mode", "fixed", side) == "fitted" ? forward::RMode::Fitted : forward::RMode::Fixed;
    p.r_fitted = json_get(j, "phonon_rate_hz", 0.0, side);
    p.r_stderr = json_get(j, "phonon_rate_stderr_hz", 0.0, side);
    p.baseline_offset = json_get(j, "baseline_offset_hz", 0.0, side);
    for (auto i : json_get<std::vector<std::size_t>>(j, "failed_indices", {}, side))
      if (i < p.converged.size()) p.converged[i] = false;
  }
  return p;
}

void write_spectrum(const fs::path& csv_path, const SpectralDensity& s) {
  CsvTable t{{"frequency_MHz", "density"}, {}};
  for (std::size_t i = 0; i < s.size(); ++i) t.rows.push_back({angular_to_mhz(s.omega()[i]), s.values()[i]});
  write_csv(csv_path, t);
}

SpectralDensity read_spectrum(const fs::path& csv_path) {
  const auto t = read_csv(csv_path, {"frequency_MHz", "density"});
  std::vector<double> omega;
  std::vector<double> values;
  for (const auto& row : t.rows) {
    omega.push_back(mhz_to_angular(row[0]));
    values.push_back(row[1]);
  }
  if (omega.size() < 2) throw FormatError(csv_path.string(), 2, "need at least two rows");
  try {
    return SpectralDensity(std::move(omega), std::move(values));
  } catch (const std::invalid_argument& e) {
    throw FormatError(csv_path.string(), 2, e.what());
  }
}

namespace {

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

}  // namespace

void write_svg(const fs::path& path, const std::string& title, const std::string& x_label, const std::string& y_label,
               const std::vector<SvgSeries>& series) {
  constexpr double W = 760, H = 460, L = 80, R = 20, T = 40, B = 60;
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      x0 = std::min(x0, s.x[i]), x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]), y1 = std::max(y1, s.y[i]);
    }
  if (!(x1 > x0)) x0 -= 1, x1 += 1;
  if (!(y1 > y0)) y0 -= 1, y1 += 1;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad, y1 += pad;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << escape_xml(title) << "</text>\n";
  o << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + k * (x1 - x0) / 4, yv = y0 + k * (y1 - y0) / 4;
    o << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << tick(xv) << "</text>\n";
    o << "<text x=\"" << L - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << tick(yv) << "</text>\n";
  }
  o << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 16 << "\" text-anchor=\"middle\">" << escape_xml(x_label) << "</text>\n";
  o << "<text transform=\"translate(18," << (T + H - B) / 2 << ") rotate(-90)\" text-anchor=\"middle\">" << escape_xml(y_label)
    << "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = colors[s % 5];
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.2\" points=\"";
    for (std::size_t i = 0; i < series[s].x.size() && i < series[s].y.size(); ++i) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px(series[s].x[i]), py(series[s].y[i]));
      o << buf;
    }
    o << "\"/>\n";
    o << "<text x=\"" << W - R - 8 << "\" y=\"" << T + 16 + 16 * static_cast<double>(s) << "\" text-anchor=\"end\" fill=\"" << color
      << "\">" << escape_xml(series[s].label) << "</text>\n";
  }
  o << "</svg>\n";
  write_text(path, o.str());
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

}  // namespace nvesr::io
