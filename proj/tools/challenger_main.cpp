// Native challenger program for the referee.
//
//   bellkit-challenger --kind lhv --seed S --n N            spreadsheet CSV on stdout
//   bellkit-challenger --kind lhv --seed S --x X --y Y      one replayed run, "a,b"
//   bellkit-challenger --kind lhv --seed S --interactive    interactive client on stdio
//   bellkit-challenger --kind lhv --seed S --listen PORT    interactive client over TCP
//   bellkit-challenger --role source|A|B                    three-node node on stdio
//
// Exit codes: 0 ok, 1 usage, 3 protocol or audit failure, 4 replay unsupported.
#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <unistd.h>

#include "bellkit/challengers.hpp"

int main(int argc, char** argv) {
  using namespace bellkit;
  CLI::App app{"bellkit native challenger"};
  std::string kind_name = "lhv";
  std::uint64_t seed = 0;
  std::size_t n = 0;
  int x = -1;
  int y = -1;
  bool interactive = false;
  int listen_port = -1;
  std::string role;
  app.add_option("--kind", kind_name, "lhv, wallclock, fixed, cheat-y, cheater, memory, eager, chatty");
  app.add_option("--seed", seed);
  app.add_option("--n", n)->check(CLI::PositiveNumber);
  app.add_option("--x", x)->check(CLI::Range(0, 1));
  app.add_option("--y", y)->check(CLI::Range(0, 1));
  app.add_flag("--interactive", interactive);
  app.add_option("--listen", listen_port, "TCP port on 127.0.0.1 (0 = any; the port is printed)");
  app.add_option("--role", role)->check(CLI::IsMember({"source", "A", "B"}));
  CLI11_PARSE(app, argc, argv);

  challengers::Kind kind{};
  try {
    kind = challengers::parse_kind(kind_name);
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    return 1;
  }
  try {
    if (!role.empty()) {
      io::FdChannel ch(STDIN_FILENO, STDOUT_FILENO);
      if (role == "source") {
        challengers::serve_source(ch, seed);
      } else {
        challengers::serve_station(ch, role[0], kind);
      }
      return 0;
    }
    if (interactive) {
      io::FdChannel ch(STDIN_FILENO, STDOUT_FILENO);
      challengers::serve_interactive(ch, kind, seed);
      return 0;
    }
    if (listen_port >= 0) {
      io::TcpListener listener(static_cast<std::uint16_t>(listen_port));
      std::cout << listener.port() << std::endl;
      auto ch = listener.accept();
      challengers::serve_interactive(ch, kind, seed);
      return 0;
    }
    if (x >= 0 || y >= 0) {
      if (x < 0 || y < 0) throw CLI::ValidationError("--x and --y go together");
      const auto r = challengers::single_run(kind, seed, x, y);
      if (!r) {
        std::cerr << "single-run replay not supported\n";
        return 4;
      }
      std::cout << r->first << ',' << r->second << '\n';
      return 0;
    }
    if (n == 0) {
      std::cerr << "need --n, --x/--y, --interactive, --listen or --role\n";
      return 1;
    }
    std::cout << challengers::spreadsheet(kind, seed, n);
    return 0;
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "bellkit-challenger: " << e.what() << '\n';
    return 3;
  }
}
