#include "synthetic.hpp"

#include <cmath>
#include <string>

#include "hal/random.hpp"

namespace hal::testing {

namespace {

// Samples index i with probability proportional to 1 / (i + 1).
class ZipfSampler {
 public:
  explicit ZipfSampler(std::size_t n) : cumulative_(n) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) cumulative_[i] = total += 1.0 / static_cast<double>(i + 1);
    for (double& c : cumulative_) c /= total;
  }
  std::size_t operator()(Rng& rng) const {
    const double u = rng.uniform();
    std::size_t lo = 0, hi = cumulative_.size() - 1;
    while (lo < hi) {
      const auto mid = (lo + hi) / 2;
      if (cumulative_[mid] < u) lo = mid + 1; else hi = mid;
    }
    return lo;
  }

 private:
  std::vector<double> cumulative_;
};

}  // namespace

SyntheticCorpus make_sentiment_corpus(const SyntheticOptions& options) {
  Rng rng(options.seed);
  const ZipfSampler stop(options.stop_words);
  const ZipfSampler neutral(options.neutral_words);

  std::vector<RawDocument> docs;
  docs.reserve(options.documents);
  for (std::size_t d = 0; d < options.documents; ++d) {
    const Label label = d % 2 == 0 ? Label::Positive : Label::Negative;
    const auto length = options.min_length + rng.below(options.max_length - options.min_length + 1);
    std::vector<std::string> words;
    words.reserve(length + options.phrases * options.phrase_length);
    for (std::size_t i = 0; i < length; ++i) {
      words.push_back(rng.uniform() < options.stop_fraction ? "s" + std::to_string(stop(rng))
                                                         : "n" + std::to_string(neutral(rng)));
    }
    for (std::size_t p = 0; p < options.phrases; ++p) {
      const bool agrees = rng.uniform() < options.phrase_agreement;
      const bool positive = (label == Label::Positive) == agrees;
      const auto at = rng.below(words.size() + 1);
      std::vector<std::string> phrase;
      for (std::size_t j = 0; j < options.phrase_length; ++j) {
        phrase.push_back((positive ? "p" : "q") + std::to_string(rng.below(options.polar_words)));
      }
      words.insert(words.begin() + static_cast<std::ptrdiff_t>(at), phrase.begin(), phrase.end());
    }
    std::string text;
    for (const auto& w : words) {
      if (!text.empty()) text += ' ';
      text += w;
    }
    docs.push_back({std::move(text), label});
  }

  SyntheticCorpus out;
  const auto train_count = options.documents - options.test_documents;
  out.train.assign(docs.begin(), docs.begin() + static_cast<std::ptrdiff_t>(train_count));
  out.test.assign(docs.begin() + static_cast<std::ptrdiff_t>(train_count), docs.end());
  return out;
}

}  // namespace hal::testing
