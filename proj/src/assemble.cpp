#include <fstream>
#include <iostream>

#include "contcomm/pipeline.hpp"

namespace contcomm::gateway {

Resources load_resources(const PipelineConfig& config) {
  Resources r;
  if (!config.dictionary.empty())
    r.dictionary = std::make_shared<corpus::HazardDictionary>(corpus::load_dictionary(config.dictionary));
  if (!config.gazetteer.empty()) r.gazetteer = geoloc::Gazetteer::load(config.gazetteer);
  if (!config.stopwords.empty()) r.stopwords = textprep::StopWords::load(config.stopwords);

  if (!config.remote_classifier.empty()) {
    r.classifier = std::make_shared<veracity::RemoteClassifier>(veracity::RemoteClassifierSpec{
        config.remote_classifier, config.remote_timeout,
        config.remote_mark_unchecked ? veracity::Fallback::MarkUnchecked : veracity::Fallback::PassThrough});
  } else if (!config.veracity_model.empty()) {
    std::ifstream in(config.veracity_model);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + config.veracity_model);
    auto model = veracity::model_from_json(nlohmann::json::parse(in));
    r.classifier = std::make_shared<veracity::LinearClassifier>(
        std::make_shared<const veracity::LinearFakeNewsModel>(std::move(model)));
  } else if (!config.veracity_training.empty()) {
    veracity::TrainOptions opt;
    opt.seed = config.veracity_seed;
    auto trained = veracity::train_linear(veracity::load_labeled_tsv(config.veracity_training, r.stopwords), opt);
    r.veracity_test = trained.test;
    r.classifier = std::make_shared<veracity::LinearClassifier>(
        std::make_shared<const veracity::LinearFakeNewsModel>(std::move(trained.model)));
  } else {
    std::clog << "pipeline: no veracity model configured, nothing will be filtered\n";
    r.classifier = std::make_shared<AcceptAllClassifier>();
  }
  return r;
}

StreamRunner::Opener make_opener(const PipelineConfig& config,
                                 std::shared_ptr<const corpus::HazardDictionary> dictionary) {
  if (config.source.empty()) throw Error(ErrorCode::InvalidArgument, "config has no source");
  corpus::StreamSource src;
  if (config.source == "synthetic") {
    src.kind = corpus::StreamSource::Kind::Synthetic;
    src.synthetic = corpus::hydro_synthetic_config(config.source_seed, config.source_count);
  } else {
    src.kind = corpus::StreamSource::Kind::FileReplay;
    src.path = config.source;
    if (config.source_rate > 0) src.rate = config.source_rate;
  }
  return [src, dictionary]() -> std::unique_ptr<corpus::TweetStream> {
    if (dictionary) return corpus::open_stream(src, dictionary);
    if (src.kind == corpus::StreamSource::Kind::Synthetic) return std::make_unique<corpus::SyntheticStream>(src.synthetic);
    return std::make_unique<corpus::FileReplayStream>(src.path, src.rate);
  };
}

}  // namespace contcomm::gateway
