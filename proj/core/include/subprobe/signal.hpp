#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "subprobe/protocol.hpp"

namespace subprobe::signal {

// Multichannel recording in microvolts, one row per channel.
struct Recording {
  double fs = 0.0;
  std::vector<std::string> channel_labels;
  Eigen::MatrixXd samples;  // [n_channels x n_samples]

  Eigen::Index n_channels() const { return samples.rows(); }
  Eigen::Index n_samples() const { return samples.cols(); }
  double duration_s() const {
    return fs > 0.0 ? static_cast<double>(n_samples()) / fs : 0.0;
  }
};

// On-disk container: <base>.hdr (structured text: fs, dimensions, channel
// labels) plus <base>.raw (32-bit IEEE-754 little-endian floats, channel 0's
// samples first, then channel 1's, ...).
void write_recording(const Recording& recording, const std::string& base_path);
Recording read_recording(const std::string& base_path);

// Fixed window of signal around one stimulus onset.
struct Epoch {
  Eigen::MatrixXd data;  // [n_channels x (n_pre + n_post)]
  protocol::StimulusEvent event;
  std::vector<std::string> channel_labels;
  double fs = 0.0;
  Eigen::Index n_pre = 0;

  Eigen::Index n_channels() const { return data.rows(); }
  Eigen::Index n_samples() const { return data.cols(); }
};

struct EpochWindow {
  double pre_s = 0.2;
  double post_s = 1.0;
};

// One epoch per schedule event, sample-aligned: n_pre = floor(pre_s * fs),
// n_post = floor(post_s * fs), spanning [floor(onset * fs) - n_pre,
// floor(onset * fs) + n_post). Events whose window leaves the recording are
// an error.
std::vector<Epoch> extract_epochs(const Recording& recording,
                                  const protocol::StimulusSchedule& schedule,
                                  const EpochWindow& window = {});

// Subtracts the per-channel mean of the n_pre pre-onset samples.
Epoch baseline_correct(Epoch epoch);

// Band edges are fractions of Nyquist by default; SampleRate reads them as
// fractions of the sampling rate instead (so 0.35 means 0.7 Nyquist).
enum class FreqConvention { Nyquist, SampleRate };

struct FilterDesign {
  double passband_edge = 0.35;
  double stopband_edge = 0.40;
  FreqConvention convention = FreqConvention::Nyquist;
};

// Linear-phase windowed-sinc (Hamming) low-pass with cutoff midway between
// the band edges and length chosen so the transition fits the requested band.
// Tap count is odd; taps sum to 1.
std::vector<double> design_lowpass(const FilterDesign& design);

// Zero-padded convolution with group-delay compensation: output is
// time-aligned with the input and has the same length. Taps must be odd.
Eigen::VectorXd apply_fir(const Eigen::VectorXd& x, const std::vector<double>& taps);

Epoch lowpass(Epoch epoch, const FilterDesign& design = {});

// Per channel, output[j] = median of input[j*factor .. (j+1)*factor); the
// median of an even count is the mean of the two middle values. Sample count
// must be divisible by the factor.
Epoch median_decimate(Epoch epoch, int factor);

// Rows reordered to `names`; unknown names are an error.
Epoch select_channels(const Epoch& epoch, const std::vector<std::string>& names);

// The eight posterior/occipital channels used for classification.
const std::vector<std::string>& default_channels();

struct PreprocessConfig {
  EpochWindow window;
  FilterDesign filter;
  int decimate_factor = 4;
  std::vector<std::string> channels = default_channels();
};

// Feature dimensionality K implied by a preprocessing config at a given
// sampling rate (channels x decimated epoch length).
Eigen::Index feature_dim(const PreprocessConfig& config, double fs);

// Order-stable hash of the preprocessing configuration; embedded in trained
// models so a model is never applied to differently produced features.
std::uint64_t preprocessing_fingerprint(const PreprocessConfig& config);

struct LabeledDataset {
  Eigen::MatrixXd X;  // [n_epochs x K], row-major concatenation of channels
  Eigen::VectorXd y;  // 0/1, y_i = 1 iff candidate_ids[i] == target id
  std::vector<std::string> candidate_ids;

  Eigen::Index n_rows() const { return X.rows(); }
};

// Full pipeline: extract -> baseline -> lowpass -> median_decimate ->
// select_channels -> per-epoch concatenation. Row i corresponds to schedule
// event i.
LabeledDataset preprocess(const Recording& recording,
                          const protocol::StimulusSchedule& schedule,
                          const std::string& target_id,
                          const PreprocessConfig& config = {});

}  // namespace subprobe::signal
