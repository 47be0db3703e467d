// Gradient provider backed by AnalyticLinearModel, speaking the stdio protocol.
// --fault injects one misbehaviour for client tests.

#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "igprobe/linear_model.hpp"
#include "igprobe/provider.hpp"

using nlohmann::json;

int main(int argc, char** argv) {
    CLI::App app{"mock gradient provider"};
    std::size_t h = 8, w = 8, classes = 4;
    std::string fault = "none";
    app.add_option("--height", h);
    app.add_option("--width", w);
    app.add_option("--classes", classes);
    app.add_option("--fault", fault)
        ->check(CLI::IsMember({"none", "wrong-length", "bad-loss", "error", "exit", "bad-hello", "garbage"}));
    CLI11_PARSE(app, argc, argv);

    if (sodium_init() < 0) return 3;
    const igprobe::AnalyticLinearModel model({h, w, 3}, classes);
    json classes_json = json::array();
    for (std::size_t j = 0; j < classes; ++j) classes_json.push_back("class" + std::to_string(j));

    if (fault == "bad-hello") {
        std::cout << json{{"type", "greeting"}}.dump() << std::endl;
        return 0;
    }
    std::cout << json{{"type", "hello"}, {"classes", classes_json}, {"input_shape", {h, w, 3}}}.dump() << std::endl;

    std::string line;
    while (std::getline(std::cin, line)) {
        if (line.empty()) continue;
        const json req = json::parse(line);
        const auto id = req.at("id").get<long long>();
        if (fault == "exit") {
            std::cerr << "mock provider: exiting on request " << id << std::endl;
            return 4;
        }
        if (fault == "garbage") {
            std::cout << "not json" << std::endl;
            continue;
        }
        if (fault == "error") {
            std::cout << json{{"type", "error"}, {"id", id}, {"message", "injected failure"}}.dump() << std::endl;
            continue;
        }
        try {
            const auto pixels = igprobe::decode_f32le(req.at("image").get<std::string>());
            const igprobe::Tensor x(model.input_shape(), pixels);
            const auto label = req.at("label").get<std::size_t>();
            auto lg = model.evaluate(x, label);
            std::vector<double> grad(lg.grad.data().begin(), lg.grad.data().end());
            if (fault == "wrong-length") grad.pop_back();
            if (fault == "bad-loss") lg.loss += 0.5;
            std::cout << json{{"type", "grad_result"},
                              {"id", id},
                              {"loss", lg.loss},
                              {"logits", lg.logits.vec()},
                              {"grad", igprobe::encode_f32le(grad)}}
                             .dump()
                      << std::endl;
        } catch (const std::exception& e) {
            std::cout << json{{"type", "error"}, {"id", id}, {"message", e.what()}}.dump() << std::endl;
        }
    }
    return 0;
}
