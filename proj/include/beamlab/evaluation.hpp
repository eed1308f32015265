#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace beamlab {

// Sliding-window analysis parameters shared by every SIR metric. The 1024
// sample window (128 ms at 8 kHz) keeps 100 Hz bands around 2 kHz and 3 kHz
// tones cleanly separated.
struct AnalysisSpec {
    int window = 1024;
    int hop = 512;
    double band_hz = 100.0; // integration bandwidth centered on each tone
};

enum class SirVariant { tone_tone, broadband };

std::string variant_name(SirVariant variant);

// Windowed SIR time series. A window whose denominator (or numerator)
// carries no power has no finite ratio and is stored as absent rather than
// an infinity.
struct SirSeries {
    std::vector<double> times_s; // window midpoints
    std::vector<std::optional<double>> values_db;
    SirVariant variant = SirVariant::tone_tone;
    int window = 1024;
    int hop = 512;
    double band_hz = 100.0;
};

// Power of x inside [center - bandwidth/2, center + bandwidth/2], from a
// Hann-windowed averaged periodogram (window length `window`, half
// overlap). Scaled so a sine of amplitude A at an analysis bin center
// integrates to A^2/2.
double band_power(const Eigen::VectorXd& x, double sample_rate, double center_hz,
                  double bandwidth_hz, int window = 1024);

// Mean power of x under the same Hann weighting, i.e. the full-band
// counterpart of band_power (they agree through Parseval's identity).
double total_power(const Eigen::VectorXd& x, int window = 1024);

// Per-window ratio of target-band to interferer-band power, in dB.
SirSeries sir_tone_tone(const Eigen::VectorXd& x, double sample_rate, double f_target_hz,
                        double f_int_hz, const AnalysisSpec& spec = {});

// Per-window 10*log10((P_total - P_int)/P_int); windows with no power
// above the interferer band are absent.
SirSeries sir_broadband(const Eigen::VectorXd& x, double sample_rate, double f_int_hz,
                        const AnalysisSpec& spec = {});

// Pointwise bf - nbf. Requires matching variant, window geometry, and
// window times; absent inputs stay absent.
SirSeries delta_sir(const SirSeries& bf, const SirSeries& nbf);

struct SeriesSummary {
    std::size_t count = 0; // windows with a finite value
    double mean_db = 0.0;
    double std_db = 0.0; // sample standard deviation
    double median_db = 0.0;
};

SeriesSummary summarize(const SirSeries& series);

// Least-squares polynomial trend (default order five) fitted over the
// present values and evaluated at every window time. Empty when nothing is
// present; the order degrades gracefully when there are few points.
std::vector<double> fitted_trend(const SirSeries& series, int degree = 5);

// Columns: t_s, sir_db (empty when absent), variant, and optionally the
// fitted trend.
void write_sir_csv(const std::filesystem::path& path, const SirSeries& series,
                   const std::vector<double>* trend_db = nullptr);

} // namespace beamlab
