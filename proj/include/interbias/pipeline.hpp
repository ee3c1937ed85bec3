// interbias/pipeline.hpp

// Copyright 2026  The InterBias Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// One resolved settings bundle for the whole pipeline, plus the stage
// functions the CLI subcommands and the experiment harness share: corpus
// generation, training (with the LM fitted on the train transcripts),
// trigger harvesting and the full evaluation experiment.

#ifndef INTERBIAS_PIPELINE_HPP_
#define INTERBIAS_PIPELINE_HPP_

#include <string>
#include <vector>

#include "interbias/biasing.hpp"
#include "interbias/encoder.hpp"
#include "interbias/eval.hpp"
#include "interbias/io.hpp"
#include "interbias/lm.hpp"
#include "interbias/synth.hpp"

namespace interbias {

struct PipelineSettings {
  uint64_t seed = 1;

  // Synthetic audio.
  int feature_dim = 16;
  int frames_min = 1, frames_max = 3;
  double noise_std = 0.5;
  double proto_scale = 1.0;

  // Corpus.
  int lexicon_size = 80;
  int word_min = 3, word_max = 7;
  int train_size = 1500, dev_size = 150;
  int oov_keywords = 24, nonoov_keywords = 12;
  int keyword_occurrences = 10, test_fillers = 40;
  int nonoov_train_occurrences = 2;
  int sent_words_min = 3, sent_words_max = 6;

  // Model: pre-norm attention blocks at desk scale. The full-scale reference
  // configuration (18 conformer layers, dim 512, 8 heads, kernel 31) is out
  // of reach here and kept only as documentation.
  int num_layers = 4;
  int dim = 32;
  int hidden_dim = 64;
  std::vector<int> cond_layers{1, 2, 3};

  // Training.
  double lambda = 0.5;
  double learning_rate = 0.05;
  int epochs = 12;
  int batch_size = 16;
  double dev_cer_gate = 0.05;

  // Language model.
  int lm_order = 5;
  double lm_k = 0.1;

  // Biasing.
  double w_bias = 0.9;
  int m_bias = 3;

  // Decoding.
  int beam_size = 10;
  double lm_weight = 0.5;
  double length_penalty = 0.2;
  double kbbs_weight = 3.0;
  std::vector<int> sweep_beam_sizes{2, 3, 5, 10, 20};
  int threads = 0;

  static PipelineSettings from_config(const Config& c) {
    PipelineSettings s;
    s.seed = static_cast<uint64_t>(c.get_int("seed", static_cast<int64_t>(s.seed)));
    s.feature_dim = static_cast<int>(c.get_int("feature_dim", s.feature_dim));
    s.frames_min = static_cast<int>(c.get_int("frames_min", s.frames_min));
    s.frames_max = static_cast<int>(c.get_int("frames_max", s.frames_max));
    s.noise_std = c.get_double("noise_std", s.noise_std);
    s.proto_scale = c.get_double("proto_scale", s.proto_scale);
    s.lexicon_size = static_cast<int>(c.get_int("lexicon_size", s.lexicon_size));
    s.word_min = static_cast<int>(c.get_int("word_min", s.word_min));
    s.word_max = static_cast<int>(c.get_int("word_max", s.word_max));
    s.train_size = static_cast<int>(c.get_int("train_size", s.train_size));
    s.dev_size = static_cast<int>(c.get_int("dev_size", s.dev_size));
    s.oov_keywords = static_cast<int>(c.get_int("oov_keywords", s.oov_keywords));
    s.nonoov_keywords = static_cast<int>(c.get_int("nonoov_keywords", s.nonoov_keywords));
    s.keyword_occurrences =
        static_cast<int>(c.get_int("keyword_occurrences", s.keyword_occurrences));
    s.test_fillers = static_cast<int>(c.get_int("test_fillers", s.test_fillers));
    s.nonoov_train_occurrences = static_cast<int>(
        c.get_int("nonoov_train_occurrences", s.nonoov_train_occurrences));
    s.sent_words_min = static_cast<int>(c.get_int("sent_words_min", s.sent_words_min));
    s.sent_words_max = static_cast<int>(c.get_int("sent_words_max", s.sent_words_max));
    s.num_layers = static_cast<int>(c.get_int("num_layers", s.num_layers));
    s.dim = static_cast<int>(c.get_int("dim", s.dim));
    s.hidden_dim = static_cast<int>(c.get_int("hidden_dim", s.hidden_dim));
    s.cond_layers = c.get_int_list("cond_layers", s.cond_layers);
    s.lambda = c.get_double("lambda", s.lambda);
    s.learning_rate = c.get_double("learning_rate", s.learning_rate);
    s.epochs = static_cast<int>(c.get_int("epochs", s.epochs));
    s.batch_size = static_cast<int>(c.get_int("batch_size", s.batch_size));
    s.dev_cer_gate = c.get_double("dev_cer_gate", s.dev_cer_gate);
    s.lm_order = static_cast<int>(c.get_int("lm_order", s.lm_order));
    s.lm_k = c.get_double("lm_k", s.lm_k);
    s.w_bias = c.get_double("w_bias", s.w_bias);
    s.m_bias = static_cast<int>(c.get_int("m_bias", s.m_bias));
    s.beam_size = static_cast<int>(c.get_int("beam_size", s.beam_size));
    s.lm_weight = c.get_double("lm_weight", s.lm_weight);
    s.length_penalty = c.get_double("length_penalty", s.length_penalty);
    s.kbbs_weight = c.get_double("kbbs_weight", s.kbbs_weight);
    s.sweep_beam_sizes = c.get_int_list("sweep_beam_sizes", s.sweep_beam_sizes);
    s.threads = static_cast<int>(c.get_int("threads", s.threads));
    return s;
  }

  void to_config(Config& c) const {
    c.set_int("seed", static_cast<int64_t>(seed));
    c.set_int("feature_dim", feature_dim);
    c.set_int("frames_min", frames_min);
    c.set_int("frames_max", frames_max);
    c.set_double("noise_std", noise_std);
    c.set_double("proto_scale", proto_scale);
    c.set_int("lexicon_size", lexicon_size);
    c.set_int("word_min", word_min);
    c.set_int("word_max", word_max);
    c.set_int("train_size", train_size);
    c.set_int("dev_size", dev_size);
    c.set_int("oov_keywords", oov_keywords);
    c.set_int("nonoov_keywords", nonoov_keywords);
    c.set_int("keyword_occurrences", keyword_occurrences);
    c.set_int("test_fillers", test_fillers);
    c.set_int("nonoov_train_occurrences", nonoov_train_occurrences);
    c.set_int("sent_words_min", sent_words_min);
    c.set_int("sent_words_max", sent_words_max);
    c.set_int("num_layers", num_layers);
    c.set_int("dim", dim);
    c.set_int("hidden_dim", hidden_dim);
    std::string cl;
    for (size_t i = 0; i < cond_layers.size(); ++i)
      cl += (i ? "," : "") + std::to_string(cond_layers[i]);
    c.set("cond_layers", cl);
    c.set_double("lambda", lambda);
    c.set_double("learning_rate", learning_rate);
    c.set_int("epochs", epochs);
    c.set_int("batch_size", batch_size);
    c.set_double("dev_cer_gate", dev_cer_gate);
    c.set_int("lm_order", lm_order);
    c.set_double("lm_k", lm_k);
    c.set_double("w_bias", w_bias);
    c.set_int("m_bias", m_bias);
    c.set_int("beam_size", beam_size);
    c.set_double("lm_weight", lm_weight);
    c.set_double("length_penalty", length_penalty);
    c.set_double("kbbs_weight", kbbs_weight);
    std::string sw;
    for (size_t i = 0; i < sweep_beam_sizes.size(); ++i)
      sw += (i ? "," : "") + std::to_string(sweep_beam_sizes[i]);
    c.set("sweep_beam_sizes", sw);
    c.set_int("threads", threads);
  }

  SynthConfig synth() const {
    SynthConfig s;
    s.feature_dim = feature_dim;
    s.frames_min = frames_min;
    s.frames_max = frames_max;
    s.noise_std = noise_std;
    s.proto_scale = proto_scale;
    s.seed = seed;
    return s;
  }

  CorpusSizes corpus_sizes() const {
    CorpusSizes cs;
    cs.train = train_size;
    cs.dev = dev_size;
    cs.keyword_occurrences = keyword_occurrences;
    cs.test_fillers = test_fillers;
    cs.nonoov_train_occurrences = nonoov_train_occurrences;
    cs.sent_words_min = sent_words_min;
    cs.sent_words_max = sent_words_max;
    return cs;
  }

  TrainConfig train_config() const {
    TrainConfig t;
    t.lambda = lambda;
    t.learning_rate = learning_rate;
    t.epochs = epochs;
    t.batch_size = batch_size;
    t.seed = seed;
    return t;
  }

  BiasConfig bias_config() const {
    BiasConfig b;
    b.w_bias = w_bias;
    b.m_bias = m_bias;
    return b;
  }

  ExperimentConfig experiment_config() const {
    ExperimentConfig e;
    e.beam.beam_size = beam_size;
    e.beam.lm_weight = lm_weight;
    e.beam.length_penalty = length_penalty;
    e.beam.kbbs_weight = 0.0;
    e.kbbs = e.beam;
    e.kbbs.kbbs_weight = kbbs_weight;
    e.bias = bias_config();
    e.sweep_beam_sizes = sweep_beam_sizes;
    e.threads = threads;
    return e;
  }
};

/// Word lists + rendered splits, all derived from settings.seed.
inline CorpusBundle pipeline_gen(const PipelineSettings& s) {
  std::vector<std::string> lexicon, oov;
  make_word_lists(s.seed, s.lexicon_size, s.oov_keywords, s.word_min, s.word_max,
                  &lexicon, &oov);
  return make_corpus(s.synth(), lexicon, oov, s.nonoov_keywords, s.corpus_sizes());
}

struct TrainedArtifacts {
  EncoderModel model;
  TrainLog log;
  NgramModel lm;
  double dev_cer = 1.0;
};

inline std::vector<Sample> to_samples(const Vocabulary& vocab,
                                      const std::vector<Utterance>& utts) {
  std::vector<Sample> out;
  out.reserve(utts.size());
  for (const Utterance& u : utts) {
    auto ids = encode_text(vocab, u.text);
    if (!ids.has_value()) throw DataError("pipeline: text not encodable: " + u.text);
    out.push_back({u.features, *ids});
  }
  return out;
}

/// Greedy corpus-level CER of a model over utterances.
inline double greedy_cer(const EncoderModel& model, const std::vector<Utterance>& utts,
                         int threads = 0) {
  std::vector<int64_t> edits(utts.size()), lens(utts.size());
  detail::parallel_for(utts.size(), threads, [&](size_t i) {
    auto ref = encode_text(model.vocab, utts[i].text);
    LabelSequence hyp = greedy_decode(forward(model, utts[i].features).final_grid);
    edits[i] = levenshtein(hyp.ids, ref->ids);
    lens[i] = ref->length();
  });
  int64_t e = 0, l = 0;
  for (size_t i = 0; i < utts.size(); ++i) {
    e += edits[i];
    l += lens[i];
  }
  return l > 0 ? static_cast<double>(e) / l : 0.0;
}

/// Trains the encoder on the train split and fits the n-gram LM on the train
/// transcripts.
inline TrainedArtifacts pipeline_train(const PipelineSettings& s,
                                       const CorpusBundle& corpus) {
  TrainedArtifacts out;
  out.model = EncoderModel::init(s.num_layers, s.dim, s.feature_dim, s.hidden_dim,
                                 s.cond_layers, corpus.vocab, s.seed);
  std::vector<Sample> samples = to_samples(corpus.vocab, corpus.train);
  out.log = train(out.model, samples, s.train_config());

  std::vector<LabelSequence> transcripts;
  transcripts.reserve(samples.size());
  for (const Sample& smp : samples) transcripts.push_back(smp.target);
  out.lm = NgramModel::fit(transcripts, corpus.vocab, s.lm_order, s.lm_k);
  out.dev_cer = greedy_cer(out.model, corpus.dev, s.threads);
  return out;
}

/// Keyword synthesis for trigger harvesting: an independent per-keyword
/// stream of the corpus seed, same noise model as the corpus itself.
inline HarvestResult pipeline_triggers(const PipelineSettings& s,
                                       const CorpusBundle& corpus,
                                       const EncoderModel& model) {
  SynthConfig sc = s.synth();
  SplitMix64 root(s.seed);
  auto synth_fn = [&](const std::string& text) {
    SplitMix64 rng = root.stream("tts/" + text);
    return synthesize(text, corpus.vocab, corpus.prototypes, sc, rng);
  };
  std::vector<std::string> keywords;
  for (const KeywordMeta& km : corpus.keywords) keywords.push_back(km.keyword);
  int delim = corpus.vocab.id_of(kDelimiterToken);
  return harvest_triggers(keywords, model, synth_fn, s.bias_config(), delim);
}

inline EvalReport pipeline_experiment(const PipelineSettings& s,
                                      const CorpusBundle& corpus,
                                      const EncoderModel& model,
                                      const KeywordList& keywords, const NgramModel& lm) {
  int delim = corpus.vocab.id_of(kDelimiterToken);
  return run_experiment(corpus.test, corpus.keywords, model, keywords, lm,
                        s.experiment_config(), delim);
}

}  // namespace interbias

#endif  // INTERBIAS_PIPELINE_HPP_
