#include "beamlab/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "beamlab/beamformer.hpp"
#include "beamlab/csv.hpp"

namespace beamlab {

std::string variant_name(SirVariant variant) {
    return variant == SirVariant::tone_tone ? "tone_tone" : "broadband";
}

namespace {

void validate_window(const Eigen::VectorXd& x, int window) {
    if (window < 4 || window % 2 != 0)
        throw std::invalid_argument("analysis window must be even and at least 4 samples");
    if (x.size() < window)
        throw std::invalid_argument("signal shorter than one analysis window");
}

// Sum of scaled squared magnitudes over the inclusive bin range, normalized
// so the full-band sum equals the mean power of the windowed segment.
double segment_band_power(Eigen::FFT<double>& fft, const Eigen::VectorXd& window_fn,
                          double window_ssq, const Eigen::VectorXd& segment, int k_lo, int k_hi) {
    const int n = static_cast<int>(segment.size());
    const Eigen::VectorXd weighted = segment.cwiseProduct(window_fn);
    std::vector<std::complex<double>> spectrum;
    std::vector<double> buf(weighted.data(), weighted.data() + n);
    fft.fwd(spectrum, buf);
    double acc = 0.0;
    for (int k = std::max(k_lo, 0); k <= std::min(k_hi, n / 2); ++k) {
        const double scale = (k == 0 || k == n / 2) ? 1.0 : 2.0;
        acc += scale * std::norm(spectrum[static_cast<std::size_t>(k)]);
    }
    return acc / (static_cast<double>(n) * window_ssq);
}

struct BandSpec {
    int k_lo;
    int k_hi;
};

BandSpec band_bins(double sample_rate, double center_hz, double bandwidth_hz, int window) {
    if (!(sample_rate > 0.0))
        throw std::invalid_argument("sample rate must be positive");
    if (!(bandwidth_hz > 0.0))
        throw std::invalid_argument("bandwidth must be positive");
    const double lo = center_hz - bandwidth_hz / 2.0;
    const double hi = center_hz + bandwidth_hz / 2.0;
    if (!(lo > 0.0) || !(hi < sample_rate / 2.0))
        throw std::invalid_argument("band [" + fmt_fixed(lo, 1) + ", " + fmt_fixed(hi, 1) +
                                    "] Hz must lie strictly inside (0, " +
                                    fmt_fixed(sample_rate / 2.0, 1) + ") Hz");
    const double bin_hz = sample_rate / window;
    // small nudge so exact band edges land inside, not on a rounding seam
    BandSpec band;
    band.k_lo = static_cast<int>(std::ceil(lo / bin_hz - 1e-9));
    band.k_hi = static_cast<int>(std::floor(hi / bin_hz + 1e-9));
    return band;
}

} // namespace

double band_power(const Eigen::VectorXd& x, double sample_rate, double center_hz,
                  double bandwidth_hz, int window) {
    validate_window(x, window);
    const BandSpec band = band_bins(sample_rate, center_hz, bandwidth_hz, window);
    const Eigen::VectorXd w = periodic_hann(window);
    const double ssq = w.squaredNorm();
    Eigen::FFT<double> fft;
    const int hop = window / 2;
    double acc = 0.0;
    int segments = 0;
    for (Eigen::Index start = 0; start + window <= x.size(); start += hop) {
        acc += segment_band_power(fft, w, ssq, x.segment(start, window), band.k_lo, band.k_hi);
        ++segments;
    }
    return acc / segments;
}

double total_power(const Eigen::VectorXd& x, int window) {
    validate_window(x, window);
    const Eigen::VectorXd w = periodic_hann(window);
    const double ssq = w.squaredNorm();
    const int hop = window / 2;
    double acc = 0.0;
    int segments = 0;
    for (Eigen::Index start = 0; start + window <= x.size(); start += hop) {
        acc += x.segment(start, window).cwiseProduct(w).squaredNorm() / ssq;
        ++segments;
    }
    return acc / segments;
}

namespace {

template <typename PerWindow>
SirSeries windowed_series(const Eigen::VectorXd& x, double sample_rate, const AnalysisSpec& spec,
                          SirVariant variant, PerWindow&& per_window) {
    if (spec.hop <= 0)
        throw std::invalid_argument("analysis hop must be positive");
    validate_window(x, spec.window);
    SirSeries series;
    series.variant = variant;
    series.window = spec.window;
    series.hop = spec.hop;
    series.band_hz = spec.band_hz;
    for (Eigen::Index start = 0; start + spec.window <= x.size(); start += spec.hop) {
        series.times_s.push_back((static_cast<double>(start) + spec.window / 2.0) / sample_rate);
        series.values_db.push_back(per_window(x.segment(start, spec.window)));
    }
    return series;
}

std::optional<double> ratio_db(double numerator, double denominator) {
    if (!(denominator > 0.0) || !(numerator > 0.0))
        return std::nullopt;
    return 10.0 * std::log10(numerator / denominator);
}

} // namespace

SirSeries sir_tone_tone(const Eigen::VectorXd& x, double sample_rate, double f_target_hz,
                        double f_int_hz, const AnalysisSpec& spec) {
    if (f_target_hz == f_int_hz)
        throw std::invalid_argument("target and interferer tones must be distinct");
    // validates both bands up front so errors fire before any window math
    band_bins(sample_rate, f_target_hz, spec.band_hz, spec.window);
    band_bins(sample_rate, f_int_hz, spec.band_hz, spec.window);
    return windowed_series(x, sample_rate, spec, SirVariant::tone_tone,
                           [&](const Eigen::VectorXd& seg) {
                               const double p_t =
                                   band_power(seg, sample_rate, f_target_hz, spec.band_hz, spec.window);
                               const double p_i =
                                   band_power(seg, sample_rate, f_int_hz, spec.band_hz, spec.window);
                               // a silent interferer leaves only FFT rounding
                               // residue in its band (~240 dB down); treat the
                               // window as having no interference measurement
                               if (p_i <= 1e-24 * p_t)
                                   return std::optional<double>{};
                               return ratio_db(p_t, p_i);
                           });
}

SirSeries sir_broadband(const Eigen::VectorXd& x, double sample_rate, double f_int_hz,
                        const AnalysisSpec& spec) {
    band_bins(sample_rate, f_int_hz, spec.band_hz, spec.window);
    return windowed_series(x, sample_rate, spec, SirVariant::broadband,
                           [&](const Eigen::VectorXd& seg) {
                               const double p_int =
                                   band_power(seg, sample_rate, f_int_hz, spec.band_hz, spec.window);
                               const double p_total = total_power(seg, spec.window);
                               // when the window holds nothing but the
                               // interferer, the subtraction leaves rounding
                               // residue of either sign; a floor well above
                               // double precision keeps the verdict stable
                               const double p_speech = p_total - p_int;
                               if (p_speech <= 1e-12 * p_total)
                                   return std::optional<double>{};
                               return ratio_db(p_speech, p_int);
                           });
}

SirSeries delta_sir(const SirSeries& bf, const SirSeries& nbf) {
    if (bf.variant != nbf.variant)
        throw std::invalid_argument("cannot difference SIR series of different variants");
    if (bf.window != nbf.window || bf.hop != nbf.hop || bf.band_hz != nbf.band_hz)
        throw std::invalid_argument("cannot difference SIR series with different analysis windows");
    if (bf.times_s.size() != nbf.times_s.size())
        throw std::invalid_argument("SIR series lengths differ");
    SirSeries delta;
    delta.variant = bf.variant;
    delta.window = bf.window;
    delta.hop = bf.hop;
    delta.band_hz = bf.band_hz;
    for (std::size_t i = 0; i < bf.times_s.size(); ++i) {
        if (std::abs(bf.times_s[i] - nbf.times_s[i]) > 1e-9)
            throw std::invalid_argument("SIR series window times are not aligned");
        delta.times_s.push_back(bf.times_s[i]);
        if (bf.values_db[i] && nbf.values_db[i])
            delta.values_db.push_back(*bf.values_db[i] - *nbf.values_db[i]);
        else
            delta.values_db.push_back(std::nullopt);
    }
    return delta;
}

SeriesSummary summarize(const SirSeries& series) {
    std::vector<double> vals;
    for (const auto& v : series.values_db)
        if (v)
            vals.push_back(*v);
    SeriesSummary summary;
    summary.count = vals.size();
    if (vals.empty()) {
        summary.mean_db = summary.std_db = summary.median_db =
            std::numeric_limits<double>::quiet_NaN();
        return summary;
    }
    double sum = 0.0;
    for (double v : vals)
        sum += v;
    summary.mean_db = sum / static_cast<double>(vals.size());
    if (vals.size() > 1) {
        double ss = 0.0;
        for (double v : vals)
            ss += (v - summary.mean_db) * (v - summary.mean_db);
        summary.std_db = std::sqrt(ss / static_cast<double>(vals.size() - 1));
    }
    std::sort(vals.begin(), vals.end());
    const std::size_t mid = vals.size() / 2;
    summary.median_db =
        vals.size() % 2 == 1 ? vals[mid] : 0.5 * (vals[mid - 1] + vals[mid]);
    return summary;
}

std::vector<double> fitted_trend(const SirSeries& series, int degree) {
    if (degree < 0)
        throw std::invalid_argument("trend degree must be non-negative");
    std::vector<double> ts, vs;
    for (std::size_t i = 0; i < series.times_s.size(); ++i) {
        if (series.values_db[i]) {
            ts.push_back(series.times_s[i]);
            vs.push_back(*series.values_db[i]);
        }
    }
    if (ts.empty())
        return {};
    const int order = std::min<int>(degree, static_cast<int>(ts.size()) - 1);
    const double t_lo = *std::min_element(ts.begin(), ts.end());
    const double t_hi = *std::max_element(ts.begin(), ts.end());
    const double span = t_hi > t_lo ? t_hi - t_lo : 1.0;
    // rescale time to [-1, 1]: a raw Vandermonde in seconds is hopelessly
    // ill-conditioned at order five over a minute-long series
    auto rescale = [&](double t) { return 2.0 * (t - t_lo) / span - 1.0; };
    Eigen::MatrixXd vand(static_cast<Eigen::Index>(ts.size()), order + 1);
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(ts.size()));
    for (std::size_t i = 0; i < ts.size(); ++i) {
        double p = 1.0;
        for (int j = 0; j <= order; ++j) {
            vand(static_cast<Eigen::Index>(i), j) = p;
            p *= rescale(ts[i]);
        }
        rhs(static_cast<Eigen::Index>(i)) = vs[i];
    }
    const Eigen::VectorXd coef = vand.colPivHouseholderQr().solve(rhs);
    std::vector<double> trend;
    trend.reserve(series.times_s.size());
    for (double t : series.times_s) {
        double p = 1.0, acc = 0.0;
        for (int j = 0; j <= order; ++j) {
            acc += coef(j) * p;
            p *= rescale(t);
        }
        trend.push_back(acc);
    }
    return trend;
}

void write_sir_csv(const std::filesystem::path& path, const SirSeries& series,
                   const std::vector<double>* trend_db) {
    if (trend_db && !trend_db->empty() && trend_db->size() != series.times_s.size())
        throw std::invalid_argument("trend column length does not match the series");
    AtomicFile file(path);
    const bool with_trend = trend_db && !trend_db->empty();
    file.write_line(with_trend ? "t_s,sir_db,variant,trend_db" : "t_s,sir_db,variant");
    const std::string name = variant_name(series.variant);
    for (std::size_t i = 0; i < series.times_s.size(); ++i) {
        std::string line = fmt_fixed(series.times_s[i], 9) + "," +
                           (series.values_db[i] ? fmt_fixed(*series.values_db[i], 9) : "") + "," +
                           name;
        if (with_trend)
            line += "," + fmt_fixed((*trend_db)[i], 9);
        file.write_line(line);
    }
    file.commit();
}

} // namespace beamlab
