#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "vlnmine/mini_scene.hpp"

// Writes the synthetic one-video demo scene so the pipeline can be run end
// to end without real reconstructions. Point --endpoint at any
// chat-completion-compatible server (a mock is fine).
int main(int argc, char** argv) {
  CLI::App app{"generate the synthetic mini room-tour scene"};
  std::string out_dir;
  std::string endpoint = "http://127.0.0.1:8089/v1/chat/completions";
  app.add_option("--out", out_dir, "output directory")->required();
  app.add_option("--endpoint", endpoint, "chat-completion endpoint URL");
  CLI11_PARSE(app, argc, argv);

  const auto scene = vlnmine::generate_mini_scene(out_dir, endpoint);
  std::printf("wrote %s (video %s, %d frames)\nconfig: %s\n",
              scene.root.string().c_str(), scene.video_id.c_str(),
              scene.num_frames, scene.config_file.string().c_str());
  return 0;
}
