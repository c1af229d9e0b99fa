#include "aya/architecture/config.hpp"
#include "aya/common/error.hpp"
#include "aya/evaluation/metrics.hpp"
#include "aya/inference/generate.hpp"
#include "aya/tokenizer/bpe.hpp"
#include "aya/tokenizer/chat.hpp"
#include "aya/training/schedule.hpp"
#include "aya/training/trainer.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace aya;

namespace {

py::dict param_dict(const architecture::ModelConfig& c)
{
    const auto n = architecture::count_parameters(c);
    py::dict d;
    d["name"] = c.name;
    d["embedding"] = n.embedding;
    d["non_embedding"] = n.non_embedding;
    d["total"] = n.total();
    return d;
}

std::vector<tokenizer::ChatTurn> to_turns(const std::vector<std::pair<std::string, std::string>>& turns)
{
    std::vector<tokenizer::ChatTurn> out;
    for (const auto& [role, content] : turns) {
        out.push_back({tokenizer::parse_role(role), content});
    }
    return out;
}

// A trained checkpoint together with its tokenizer.
struct Model {
    training::Checkpoint checkpoint;
    tokenizer::TokenizerModel tokenizer;
};

} // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "Aya 23 reproduction core";

    static py::exception<Error> base(m, "AyaError", PyExc_RuntimeError);
    static py::exception<InputError> input(m, "InputError", PyExc_ValueError);
    static py::exception<ClientError> client(m, "ClientError", base.ptr());
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) {
                std::rethrow_exception(p);
            }
        } catch (const InputError& e) {
            input((e.code() + ": " + e.what()).c_str());
        } catch (const ClientError& e) {
            client((e.code() + ": " + e.what()).c_str());
        } catch (const Error& e) {
            base((e.code() + ": " + e.what()).c_str());
        }
    });

    m.def("preset_names", &architecture::preset_names);
    m.def("count_parameters", [](const std::string& preset) { return param_dict(architecture::resolve_config(preset)); },
          py::arg("preset"));
    m.def("model_config", [](const std::string& preset) { return architecture::to_config_text(architecture::resolve_config(preset)); },
          py::arg("preset"));
    m.def("kv_cache_bytes", [](const std::string& preset, std::uint64_t seq_len, bool mha) {
              const auto c = architecture::resolve_config(preset);
              return mha ? inference::mha_cache_memory_bytes(c, seq_len) : inference::cache_memory_bytes(c, seq_len);
          },
          py::arg("preset"), py::arg("seq_len"), py::arg("mha") = false);

    m.def("cosine_lr", [](std::uint64_t t, const std::string& preset) {
              return training::cosine_lr(t, training::train_preset(preset));
          },
          py::arg("step"), py::arg("preset") = "aya-23");

    py::class_<tokenizer::TokenizerModel>(m, "Tokenizer")
        .def_static("train",
                    [](const std::vector<std::string>& texts, std::size_t vocab_size, std::uint64_t seed) {
                        return tokenizer::bpe_train(texts, vocab_size, seed);
                    },
                    py::arg("texts"), py::arg("vocab_size"), py::arg("seed") = 0)
        .def_static("load", &tokenizer::TokenizerModel::load, py::arg("path"))
        .def("save", &tokenizer::TokenizerModel::save, py::arg("path"))
        .def_property_readonly("vocab_size", &tokenizer::TokenizerModel::vocab_size)
        .def("encode", &tokenizer::TokenizerModel::encode, py::arg("text"))
        .def("decode", [](const tokenizer::TokenizerModel& t, const std::vector<numerics::TokenId>& ids) {
            return t.decode(ids);
        })
        .def("render_chat",
             [](const tokenizer::TokenizerModel& t, const std::vector<std::pair<std::string, std::string>>& turns,
                std::optional<std::string> completion) {
                 const auto r = tokenizer::render_chat(to_turns(turns), completion, t);
                 py::dict d;
                 d["text"] = r.text;
                 d["ids"] = r.ids;
                 d["loss_mask"] = tokenizer::completion_mask(r);
                 return d;
             },
             py::arg("turns"), py::arg("completion") = std::nullopt);

    py::class_<Model>(m, "Model")
        .def(py::init([](const std::filesystem::path& checkpoint, const std::filesystem::path& tokenizer) {
                 return Model{training::load_checkpoint(checkpoint), tokenizer::TokenizerModel::load(tokenizer)};
             }),
             py::arg("checkpoint"), py::arg("tokenizer"))
        .def_property_readonly("config", [](const Model& mo) { return architecture::to_config_text(mo.checkpoint.model_config); })
        .def("generate",
             [](const Model& mo, const std::string& prompt, std::size_t max_new_tokens, double temperature,
                std::uint64_t seed) {
                 inference::GenerationConfig gen;
                 gen.max_new_tokens = max_new_tokens;
                 gen.temperature = temperature;
                 gen.seed = seed;
                 const std::vector<tokenizer::ChatTurn> turns{{tokenizer::Role::user, prompt}};
                 py::gil_scoped_release release;
                 const auto out = inference::generate(mo.checkpoint.model_config, mo.checkpoint.weights, turns, gen,
                                                      mo.tokenizer);
                 return std::make_pair(out.completion, std::string(inference::to_string(out.result.finish_reason)));
             },
             py::arg("prompt"), py::arg("max_new_tokens") = 64, py::arg("temperature") = 0.0, py::arg("seed") = 0);

    m.def("bleu", [](const std::string& h, const std::string& r) { return evaluation::bleu(h, r); },
          py::arg("hypothesis"), py::arg("reference"));
    m.def("rouge_l", [](const std::string& h, const std::string& r) { return evaluation::rouge_l(h, r); },
          py::arg("hypothesis"), py::arg("reference"));
    m.def("strict_match", &evaluation::strict_match, py::arg("text"));
    m.def("expected_max_toxicity",
          [](const std::vector<std::vector<double>>& s, std::size_t k) { return evaluation::expected_max_toxicity(s, k); },
          py::arg("scores"), py::arg("k"));
    m.def("toxicity_probability",
          [](const std::vector<std::vector<double>>& s, std::size_t k, double tau) {
              return evaluation::toxicity_probability(s, k, tau);
          },
          py::arg("scores"), py::arg("k"), py::arg("threshold") = 0.5);
    m.def("win_rate", [](const std::vector<std::string>& verdicts) {
              std::vector<evaluation::Verdict> v;
              for (const auto& s : verdicts) {
                  v.push_back(evaluation::parse_verdict(s));
              }
              const auto w = evaluation::win_rate(v);
              py::dict d;
              d["win_a"] = w.win_a;
              d["win_b"] = w.win_b;
              d["tie"] = w.tie;
              return d;
          },
          py::arg("verdicts"));
}
