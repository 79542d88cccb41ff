#include "subprobe/signal.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "subprobe/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "raw payload I/O assumes a little-endian host");

namespace subprobe::signal {

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

std::uint64_t fnv1a(std::uint64_t hash, const std::string& text) {
  for (unsigned char c : text) {
    hash ^= c;
    hash *= kFnvPrime;
  }
  return hash;
}

std::string format_g9(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.9g", value);
  return buffer;
}

// Band edges expressed as fractions of Nyquist regardless of the configured
// convention.
std::pair<double, double> nyquist_edges(const FilterDesign& design) {
  double pass = design.passband_edge;
  double stop = design.stopband_edge;
  if (design.convention == FreqConvention::SampleRate) {
    pass *= 2.0;
    stop *= 2.0;
  }
  if (!(pass > 0.0) || !(stop > pass) || !(stop < 1.0)) {
    throw ConfigError("invalid low-pass band edges [" + format_g9(pass) + ", " +
                      format_g9(stop) + "] (Nyquist units)");
  }
  return {pass, stop};
}

}  // namespace

void write_recording(const Recording& recording, const std::string& base_path) {
  if (recording.channel_labels.size() !=
      static_cast<std::size_t>(recording.n_channels())) {
    throw DataError("recording has " + std::to_string(recording.n_channels()) +
                    " channels but " + std::to_string(recording.channel_labels.size()) +
                    " labels");
  }

  {
    std::ofstream hdr(base_path + ".hdr", std::ios::binary);
    if (!hdr) throw IoError("cannot open '" + base_path + ".hdr' for writing");
    hdr << "subprobe-recording v1\n";
    hdr << "fs " << format_g9(recording.fs) << '\n';
    hdr << "n_channels " << recording.n_channels() << '\n';
    hdr << "n_samples " << recording.n_samples() << '\n';
    hdr << "channels";
    for (const auto& label : recording.channel_labels) hdr << ' ' << label;
    hdr << '\n';
    if (!hdr) throw IoError("failed writing '" + base_path + ".hdr'");
  }

  std::ofstream raw(base_path + ".raw", std::ios::binary);
  if (!raw) throw IoError("cannot open '" + base_path + ".raw' for writing");
  std::vector<float> row(static_cast<std::size_t>(recording.n_samples()));
  for (Eigen::Index c = 0; c < recording.n_channels(); ++c) {
    for (Eigen::Index s = 0; s < recording.n_samples(); ++s) {
      row[static_cast<std::size_t>(s)] = static_cast<float>(recording.samples(c, s));
    }
    raw.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  if (!raw) throw IoError("failed writing '" + base_path + ".raw'");
}

Recording read_recording(const std::string& base_path) {
  std::ifstream hdr(base_path + ".hdr");
  if (!hdr) throw IoError("cannot open recording header '" + base_path + ".hdr'");

  std::string line;
  if (!std::getline(hdr, line) || line != "subprobe-recording v1") {
    throw IoError("'" + base_path + ".hdr' is not a recording header");
  }

  Recording recording;
  Eigen::Index n_channels = -1;
  Eigen::Index n_samples = -1;
  while (std::getline(hdr, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string key;
    row >> key;
    if (key == "fs") {
      row >> recording.fs;
    } else if (key == "n_channels") {
      row >> n_channels;
    } else if (key == "n_samples") {
      row >> n_samples;
    } else if (key == "channels") {
      std::string label;
      while (row >> label) recording.channel_labels.push_back(label);
    } else {
      throw IoError("unknown recording header field '" + key + "'");
    }
    if (row.fail() && !row.eof()) {
      throw IoError("malformed recording header line '" + line + "'");
    }
  }
  if (!(recording.fs > 0.0) || n_channels < 0 || n_samples < 0) {
    throw IoError("incomplete recording header '" + base_path + ".hdr'");
  }
  if (recording.channel_labels.size() != static_cast<std::size_t>(n_channels)) {
    throw IoError("recording header channel count mismatch");
  }

  std::ifstream raw(base_path + ".raw", std::ios::binary);
  if (!raw) throw IoError("cannot open recording payload '" + base_path + ".raw'");
  recording.samples.resize(n_channels, n_samples);
  std::vector<float> row(static_cast<std::size_t>(n_samples));
  for (Eigen::Index c = 0; c < n_channels; ++c) {
    raw.read(reinterpret_cast<char*>(row.data()),
             static_cast<std::streamsize>(row.size() * sizeof(float)));
    if (raw.gcount() != static_cast<std::streamsize>(row.size() * sizeof(float))) {
      throw IoError("recording payload '" + base_path + ".raw' is truncated");
    }
    for (Eigen::Index s = 0; s < n_samples; ++s) {
      recording.samples(c, s) = static_cast<double>(row[static_cast<std::size_t>(s)]);
    }
  }
  if (raw.peek() != std::char_traits<char>::eof()) {
    throw IoError("recording payload '" + base_path + ".raw' has trailing bytes");
  }
  return recording;
}

std::vector<Epoch> extract_epochs(const Recording& recording,
                                  const protocol::StimulusSchedule& schedule,
                                  const EpochWindow& window) {
  if (!(recording.fs > 0.0)) throw DataError("recording has non-positive fs");
  const auto n_pre = static_cast<Eigen::Index>(std::floor(window.pre_s * recording.fs));
  const auto n_post = static_cast<Eigen::Index>(std::floor(window.post_s * recording.fs));
  if (n_pre + n_post <= 0) throw ConfigError("epoch window is empty");

  std::vector<Epoch> epochs;
  epochs.reserve(schedule.events.size());
  for (std::size_t i = 0; i < schedule.events.size(); ++i) {
    const auto& event = schedule.events[i];
    const auto onset =
        static_cast<Eigen::Index>(std::floor(event.onset_s * recording.fs));
    const Eigen::Index first = onset - n_pre;
    const Eigen::Index last = onset + n_post;  // exclusive
    if (first < 0 || last > recording.n_samples()) {
      throw DataError("epoch window [" + std::to_string(first) + ", " +
                      std::to_string(last) + ") for event " + std::to_string(i) +
                      " ('" + event.candidate_id + "' at " +
                      format_g9(event.onset_s) + " s) leaves the recording");
    }
    Epoch epoch;
    epoch.data = recording.samples.middleCols(first, n_pre + n_post);
    epoch.event = event;
    epoch.channel_labels = recording.channel_labels;
    epoch.fs = recording.fs;
    epoch.n_pre = n_pre;
    epochs.push_back(std::move(epoch));
  }
  return epochs;
}

Epoch baseline_correct(Epoch epoch) {
  if (epoch.n_pre <= 0) throw DataError("baseline correction needs n_pre > 0");
  if (epoch.n_pre > epoch.n_samples()) {
    throw DataError("baseline window longer than epoch");
  }
  const Eigen::VectorXd baseline =
      epoch.data.leftCols(epoch.n_pre).rowwise().mean();
  epoch.data.colwise() -= baseline;
  return epoch;
}

std::vector<double> design_lowpass(const FilterDesign& design) {
  const auto [pass, stop] = nyquist_edges(design);
  const double cutoff = 0.5 * (pass + stop);      // Nyquist units
  const double transition = stop - pass;          // Nyquist units

  // Hamming-window transition width is about 6.6/n in Nyquist units.
  auto n_taps = static_cast<std::size_t>(std::ceil(6.6 / transition));
  if (n_taps % 2 == 0) ++n_taps;
  if (n_taps < 3) n_taps = 3;

  const auto mid = static_cast<double>(n_taps - 1) / 2.0;
  std::vector<double> taps(n_taps);
  double sum = 0.0;
  for (std::size_t i = 0; i < n_taps; ++i) {
    const double k = static_cast<double>(i) - mid;
    // sinc at the cutoff (omega_c = pi * cutoff rad/sample) ...
    const double x = std::numbers::pi * cutoff * k;
    double value = (k == 0.0) ? cutoff : std::sin(x) / (std::numbers::pi * k);
    // ... shaped by a Hamming window.
    value *= 0.54 + 0.46 * std::cos(2.0 * std::numbers::pi * k /
                                    static_cast<double>(n_taps - 1));
    taps[i] = value;
    sum += value;
  }
  for (auto& tap : taps) tap /= sum;  // unit DC gain
  return taps;
}

Eigen::VectorXd apply_fir(const Eigen::VectorXd& x, const std::vector<double>& taps) {
  if (taps.empty() || taps.size() % 2 == 0) {
    throw ConfigError("FIR taps must be a non-empty odd-length vector");
  }
  const auto n = x.size();
  const auto n_taps = static_cast<Eigen::Index>(taps.size());
  const Eigen::Index delay = (n_taps - 1) / 2;

  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    // y[i] = sum_k h[k] * x[i + delay - k], zero outside the input.
    const Eigen::Index k_lo = std::max<Eigen::Index>(0, i + delay - n + 1);
    const Eigen::Index k_hi = std::min<Eigen::Index>(n_taps - 1, i + delay);
    double acc = 0.0;
    for (Eigen::Index k = k_lo; k <= k_hi; ++k) {
      acc += taps[static_cast<std::size_t>(k)] * x[i + delay - k];
    }
    y[i] = acc;
  }
  return y;
}

Epoch lowpass(Epoch epoch, const FilterDesign& design) {
  const std::vector<double> taps = design_lowpass(design);
  for (Eigen::Index c = 0; c < epoch.n_channels(); ++c) {
    epoch.data.row(c) = apply_fir(epoch.data.row(c).transpose(), taps).transpose();
  }
  return epoch;
}

Epoch median_decimate(Epoch epoch, int factor) {
  if (factor < 1) throw ConfigError("decimation factor must be >= 1");
  if (factor == 1) return epoch;
  const Eigen::Index n = epoch.n_samples();
  if (n % factor != 0) {
    throw DataError("epoch length " + std::to_string(n) +
                    " not divisible by decimation factor " + std::to_string(factor));
  }
  const Eigen::Index out_n = n / factor;
  Eigen::MatrixXd out(epoch.n_channels(), out_n);
  std::vector<double> block(static_cast<std::size_t>(factor));
  for (Eigen::Index c = 0; c < epoch.n_channels(); ++c) {
    for (Eigen::Index j = 0; j < out_n; ++j) {
      for (int k = 0; k < factor; ++k) {
        block[static_cast<std::size_t>(k)] = epoch.data(c, j * factor + k);
      }
      std::sort(block.begin(), block.end());
      const auto half = static_cast<std::size_t>(factor) / 2;
      out(c, j) = (factor % 2 == 1)
                      ? block[half]
                      : 0.5 * (block[half - 1] + block[half]);
    }
  }
  epoch.data = std::move(out);
  epoch.n_pre /= factor;
  epoch.fs /= factor;
  return epoch;
}

Epoch select_channels(const Epoch& epoch, const std::vector<std::string>& names) {
  Epoch out;
  out.data.resize(static_cast<Eigen::Index>(names.size()), epoch.n_samples());
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto it = std::find(epoch.channel_labels.begin(),
                              epoch.channel_labels.end(), names[i]);
    if (it == epoch.channel_labels.end()) {
      throw DataError("channel '" + names[i] + "' not present in epoch");
    }
    const auto row = static_cast<Eigen::Index>(
        std::distance(epoch.channel_labels.begin(), it));
    out.data.row(static_cast<Eigen::Index>(i)) = epoch.data.row(row);
  }
  out.event = epoch.event;
  out.channel_labels = names;
  out.fs = epoch.fs;
  out.n_pre = epoch.n_pre;
  return out;
}

const std::vector<std::string>& default_channels() {
  static const std::vector<std::string> names = {"Fz", "Cz", "Pz", "P3",
                                                 "P4", "PO7", "PO8", "Oz"};
  return names;
}

Eigen::Index feature_dim(const PreprocessConfig& config, double fs) {
  const auto n_pre = static_cast<Eigen::Index>(std::floor(config.window.pre_s * fs));
  const auto n_post = static_cast<Eigen::Index>(std::floor(config.window.post_s * fs));
  return static_cast<Eigen::Index>(config.channels.size()) *
         ((n_pre + n_post) / config.decimate_factor);
}

std::uint64_t preprocessing_fingerprint(const PreprocessConfig& config) {
  std::string canon;
  canon += "window=" + format_g9(config.window.pre_s) + "," +
           format_g9(config.window.post_s);
  canon += ";band=" + format_g9(config.filter.passband_edge) + "," +
           format_g9(config.filter.stopband_edge);
  canon += ";conv=";
  canon += (config.filter.convention == FreqConvention::Nyquist) ? "nyquist"
                                                                 : "samplerate";
  canon += ";decimate=" + std::to_string(config.decimate_factor);
  canon += ";channels=";
  for (std::size_t i = 0; i < config.channels.size(); ++i) {
    if (i > 0) canon += ',';
    canon += config.channels[i];
  }
  return fnv1a(kFnvOffset, canon);
}

LabeledDataset preprocess(const Recording& recording,
                          const protocol::StimulusSchedule& schedule,
                          const std::string& target_id,
                          const PreprocessConfig& config) {
  const std::vector<double> taps = design_lowpass(config.filter);
  std::vector<Epoch> epochs = extract_epochs(recording, schedule, config.window);

  LabeledDataset dataset;
  dataset.candidate_ids.reserve(epochs.size());
  Eigen::Index k = -1;
  for (std::size_t i = 0; i < epochs.size(); ++i) {
    Epoch epoch = baseline_correct(std::move(epochs[i]));
    for (Eigen::Index c = 0; c < epoch.n_channels(); ++c) {
      epoch.data.row(c) = apply_fir(epoch.data.row(c).transpose(), taps).transpose();
    }
    epoch = median_decimate(std::move(epoch), config.decimate_factor);
    epoch = select_channels(epoch, config.channels);

    if (k < 0) {
      k = epoch.n_channels() * epoch.n_samples();
      dataset.X.resize(static_cast<Eigen::Index>(epochs.size()), k);
      dataset.y.resize(static_cast<Eigen::Index>(epochs.size()));
    }
    // Row-major concatenation: channel 0's samples, then channel 1's, ...
    for (Eigen::Index c = 0; c < epoch.n_channels(); ++c) {
      dataset.X.row(static_cast<Eigen::Index>(i))
          .segment(c * epoch.n_samples(), epoch.n_samples()) = epoch.data.row(c);
    }
    dataset.y[static_cast<Eigen::Index>(i)] =
        (epoch.event.candidate_id == target_id) ? 1.0 : 0.0;
    dataset.candidate_ids.push_back(epoch.event.candidate_id);
  }
  if (epochs.empty()) {
    dataset.X.resize(0, feature_dim(config, recording.fs));
    dataset.y.resize(0);
  }
  return dataset;
}

}  // namespace subprobe::signal
