#pragma once

// File formats: CSV tables with a header row, JSON sidecars and simple SVG
// line charts. Numbers are written as %.8e (9 significant digits) so that
// re-running a command reproduces files byte for byte.

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "nvesr/core.hpp"
#include "nvesr/deconv.hpp"
#include "nvesr/forward.hpp"

namespace nvesr::io {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed content; the message carries the file and row number.
class FormatError : public IoError {
 public:
  FormatError(const std::string& file, std::size_t row, const std::string& what);
  [[nodiscard]] std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

[[nodiscard]] std::string format_number(double v);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

/// Rows are numbered from 1 for the header line.
[[nodiscard]] CsvTable read_csv(const std::filesystem::path& path, const std::vector<std::string>& expected_header);
void write_csv(const std::filesystem::path& path, const CsvTable& table);

[[nodiscard]] std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

/// record.csv (field_G,time_s,contrast) plus a .json sidecar with R, sigma,
/// seed and the grids.
void write_record(const std::filesystem::path& csv_path, const forward::MeasurementRecord& record);
/// Reads the CSV and, when present, the sidecar next to it.
[[nodiscard]] forward::MeasurementRecord read_record(const std::filesystem::path& csv_path);

/// rates.csv (field_G,gamma1_hz,stderr) plus a .json sidecar with the fit mode,
/// R and convergence flags.
void write_rates(const std::filesystem::path& csv_path, const forward::RateProfile& profile);
[[nodiscard]] forward::RateProfile read_rates(const std::filesystem::path& csv_path);

/// spectrum.csv (frequency_MHz,density).
void write_spectrum(const std::filesystem::path& csv_path, const SpectralDensity& s);
[[nodiscard]] SpectralDensity read_spectrum(const std::filesystem::path& csv_path);

/// Sidecar path: same stem, .json extension.
[[nodiscard]] std::filesystem::path sidecar_path(const std::filesystem::path& csv_path);

struct SvgSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

/// Self-contained line chart.
void write_svg(const std::filesystem::path& path, const std::string& title, const std::string& x_label,
               const std::string& y_label, const std::vector<SvgSeries>& series);

/// 64-bit FNV-1a of a byte string, as 16 hex digits.
[[nodiscard]] std::string fnv1a_hex(const std::string& bytes);

}  // namespace nvesr::io
