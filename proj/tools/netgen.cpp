#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "regtsc/errors.hpp"
#include "regtsc/network.hpp"

using namespace regtsc;

int main(int argc, char **argv) {
    CLI::App app{"regtsc-netgen: emit built-in road networks as .net.json documents"};
    std::string name = "cross";
    std::string out;
    int lanes = 2;
    double length = 300.0;
    app.add_option("--template", name, "cross, tee, wye, roundabout or jinan17")
        ->check(CLI::IsMember({"cross", "tee", "wye", "roundabout", "jinan17"}));
    app.add_option("--lanes", lanes, "Lanes per approach (ignored for jinan17)");
    app.add_option("--length", length, "Approach road length in meters (ignored for jinan17)");
    app.add_option("--out", out, "Output file (stdout when omitted)");
    CLI11_PARSE(app, argc, argv);

    try {
        RoadNetwork net;
        if (name == "cross") net = make_cross(lanes, length);
        else if (name == "tee") net = make_tee(lanes, length);
        else if (name == "wye") net = make_wye(lanes, length);
        else if (name == "roundabout") net = make_roundabout(lanes, length);
        else net = make_jinan_like();

        if (out.empty()) {
            std::cout << serialize_network(net);
        } else {
            save_network(net, out);
            std::cerr << "wrote " << out << " (" << net.intersections.size()
                      << " intersections, " << net.lanes.size() << " lanes)\n";
        }
        return 0;
    } catch (const RegtscError &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
