#include "cli_common.hpp"

#include <iostream>

int main(int argc, char** argv) {
    using namespace topoembed;
    CLI::App app{"Self-supervised terrain embeddings"};
    app.require_subcommand(1);
    cli::Registry reg;
    cli::register_synth(app, reg);
    cli::register_train(app, reg);
    cli::register_scale_scan(app, reg);
    cli::register_eval(app, reg);
    cli::register_index(app, reg);
    cli::register_retrieve(app, reg);
    cli::register_train_probes(app, reg);
    cli::register_grid_classify(app, reg);
    cli::register_serve(app, reg);
    cli::register_repro_desk(app, reg);

    auto config = std::make_shared<cli::SubcommandConfig>();
    for (int i = 1; i < argc && config->subcommand.empty(); ++i) {
        for (const auto& [sub, run] : reg.commands) {
            if (sub->get_name() == argv[i]) {
                config->subcommand = argv[i];
            }
        }
    }
    app.config_formatter(config);
    app.set_config("--config", "", "TOML file with one key per flag of the subcommand");
    for (auto& [sub, run] : reg.commands) {
        sub->fallthrough();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    try {
        for (auto& [sub, run] : reg.commands) {
            if (sub->parsed()) {
                run(*sub);
            }
        }
    } catch (const Error& e) {
        std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
        return cli::exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
