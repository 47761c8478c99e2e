"""One-sided Student t critical values, df 1..200.

Generated once offline and frozen here; a test cross-checks them.
"""

CONFIDENCES = (0.95, 0.99, 0.9975)

# TABLE[conf][df - 1]
TABLE: dict[float, tuple[float, ...]] = {
    0.95: (
        6.313752, 2.919986, 2.353363, 2.131847, 2.015048, 1.943180, 1.894579, 1.859548,
        1.833113, 1.812461, 1.795885, 1.782288, 1.770933, 1.761310, 1.753050, 1.745884,
        1.739607, 1.734064, 1.729133, 1.724718, 1.720743, 1.717144, 1.713872, 1.710882,
        1.708141, 1.705618, 1.703288, 1.701131, 1.699127, 1.697261, 1.695519, 1.693889,
        1.692360, 1.690924, 1.689572, 1.688298, 1.687094, 1.685954, 1.684875, 1.683851,
        1.682878, 1.681952, 1.681071, 1.680230, 1.679427, 1.678660, 1.677927, 1.677224,
        1.676551, 1.675905, 1.675285, 1.674689, 1.674116, 1.673565, 1.673034, 1.672522,
        1.672029, 1.671553, 1.671093, 1.670649, 1.670219, 1.669804, 1.669402, 1.669013,
        1.668636, 1.668271, 1.667916, 1.667572, 1.667239, 1.666914, 1.666600, 1.666294,
        1.665996, 1.665707, 1.665425, 1.665151, 1.664885, 1.664625, 1.664371, 1.664125,
        1.663884, 1.663649, 1.663420, 1.663197, 1.662978, 1.662765, 1.662557, 1.662354,
        1.662155, 1.661961, 1.661771, 1.661585, 1.661404, 1.661226, 1.661052, 1.660881,
        1.660715, 1.660551, 1.660391, 1.660234, 1.660081, 1.659930, 1.659782, 1.659637,
        1.659495, 1.659356, 1.659219, 1.659085, 1.658953, 1.658824, 1.658697, 1.658573,
        1.658450, 1.658330, 1.658212, 1.658096, 1.657982, 1.657870, 1.657759, 1.657651,
        1.657544, 1.657439, 1.657336, 1.657235, 1.657135, 1.657037, 1.656940, 1.656845,
        1.656752, 1.656659, 1.656569, 1.656479, 1.656391, 1.656305, 1.656219, 1.656135,
        1.656052, 1.655970, 1.655890, 1.655811, 1.655732, 1.655655, 1.655579, 1.655504,
        1.655430, 1.655357, 1.655285, 1.655215, 1.655145, 1.655076, 1.655007, 1.654940,
        1.654874, 1.654808, 1.654744, 1.654680, 1.654617, 1.654555, 1.654494, 1.654433,
        1.654373, 1.654314, 1.654256, 1.654198, 1.654141, 1.654085, 1.654029, 1.653974,
        1.653920, 1.653866, 1.653813, 1.653761, 1.653709, 1.653658, 1.653607, 1.653557,
        1.653508, 1.653459, 1.653411, 1.653363, 1.653316, 1.653269, 1.653223, 1.653177,
        1.653132, 1.653087, 1.653043, 1.652999, 1.652956, 1.652913, 1.652871, 1.652829,
        1.652787, 1.652746, 1.652705, 1.652665, 1.652625, 1.652586, 1.652547, 1.652508,
    ),
    0.99: (
        31.820516, 6.964557, 4.540703, 3.746947, 3.364930, 3.142668, 2.997952, 2.896459,
        2.821438, 2.763769, 2.718079, 2.680998, 2.650309, 2.624494, 2.602480, 2.583487,
        2.566934, 2.552380, 2.539483, 2.527977, 2.517648, 2.508325, 2.499867, 2.492159,
        2.485107, 2.478630, 2.472660, 2.467140, 2.462021, 2.457262, 2.452824, 2.448678,
        2.444794, 2.441150, 2.437723, 2.434494, 2.431447, 2.428568, 2.425841, 2.423257,
        2.420803, 2.418470, 2.416250, 2.414134, 2.412116, 2.410188, 2.408345, 2.406581,
        2.404892, 2.403272, 2.401718, 2.400225, 2.398790, 2.397410, 2.396081, 2.394801,
        2.393568, 2.392377, 2.391229, 2.390119, 2.389047, 2.388011, 2.387008, 2.386037,
        2.385097, 2.384186, 2.383302, 2.382446, 2.381615, 2.380807, 2.380024, 2.379262,
        2.378522, 2.377802, 2.377102, 2.376420, 2.375757, 2.375111, 2.374482, 2.373868,
        2.373270, 2.372687, 2.372119, 2.371564, 2.371022, 2.370493, 2.369977, 2.369472,
        2.368979, 2.368497, 2.368026, 2.367566, 2.367115, 2.366674, 2.366243, 2.365821,
        2.365407, 2.365002, 2.364606, 2.364217, 2.363837, 2.363464, 2.363098, 2.362739,
        2.362388, 2.362043, 2.361704, 2.361372, 2.361046, 2.360726, 2.360412, 2.360104,
        2.359801, 2.359504, 2.359212, 2.358924, 2.358642, 2.358365, 2.358093, 2.357825,
        2.357561, 2.357302, 2.357047, 2.356797, 2.356550, 2.356307, 2.356069, 2.355834,
        2.355602, 2.355375, 2.355150, 2.354930, 2.354712, 2.354498, 2.354287, 2.354079,
        2.353875, 2.353673, 2.353474, 2.353278, 2.353085, 2.352895, 2.352707, 2.352522,
        2.352340, 2.352160, 2.351983, 2.351808, 2.351635, 2.351465, 2.351297, 2.351131,
        2.350967, 2.350806, 2.350646, 2.350489, 2.350334, 2.350180, 2.350029, 2.349880,
        2.349732, 2.349586, 2.349442, 2.349300, 2.349160, 2.349021, 2.348884, 2.348749,
        2.348615, 2.348483, 2.348352, 2.348223, 2.348096, 2.347970, 2.347845, 2.347722,
        2.347600, 2.347479, 2.347360, 2.347243, 2.347126, 2.347011, 2.346897, 2.346785,
        2.346673, 2.346563, 2.346454, 2.346346, 2.346240, 2.346134, 2.346030, 2.345926,
        2.345824, 2.345723, 2.345623, 2.345524, 2.345425, 2.345328, 2.345232, 2.345137,
    ),
    0.9975: (
        127.321336, 14.089047, 7.453319, 5.597568, 4.773341, 4.316827, 4.029337, 3.832519,
        3.689662, 3.581406, 3.496614, 3.428444, 3.372468, 3.325696, 3.286039, 3.251993,
        3.222450, 3.196574, 3.173725, 3.153401, 3.135206, 3.118824, 3.103997, 3.090514,
        3.078199, 3.066909, 3.056520, 3.046929, 3.038047, 3.029798, 3.022118, 3.014949,
        3.008242, 3.001954, 2.996047, 2.990487, 2.985244, 2.980293, 2.975609, 2.971171,
        2.966961, 2.962962, 2.959157, 2.955534, 2.952079, 2.948781, 2.945630, 2.942616,
        2.939730, 2.936964, 2.934311, 2.931765, 2.929318, 2.926965, 2.924701, 2.922521,
        2.920420, 2.918394, 2.916440, 2.914553, 2.912729, 2.910967, 2.909262, 2.907613,
        2.906015, 2.904468, 2.902968, 2.901514, 2.900103, 2.898734, 2.897404, 2.896113,
        2.894857, 2.893637, 2.892450, 2.891295, 2.890171, 2.889077, 2.888011, 2.886972,
        2.885960, 2.884973, 2.884010, 2.883071, 2.882154, 2.881260, 2.880386, 2.879533,
        2.878699, 2.877884, 2.877088, 2.876309, 2.875547, 2.874802, 2.874073, 2.873360,
        2.872661, 2.871977, 2.871308, 2.870652, 2.870009, 2.869379, 2.868761, 2.868156,
        2.867562, 2.866980, 2.866409, 2.865848, 2.865298, 2.864759, 2.864229, 2.863709,
        2.863198, 2.862696, 2.862203, 2.861719, 2.861244, 2.860776, 2.860317, 2.859865,
        2.859421, 2.858984, 2.858554, 2.858132, 2.857716, 2.857308, 2.856905, 2.856509,
        2.856120, 2.855736, 2.855358, 2.854986, 2.854620, 2.854260, 2.853904, 2.853554,
        2.853210, 2.852870, 2.852535, 2.852206, 2.851880, 2.851560, 2.851244, 2.850933,
        2.850626, 2.850323, 2.850024, 2.849730, 2.849439, 2.849152, 2.848870, 2.848591,
        2.848315, 2.848044, 2.847776, 2.847511, 2.847250, 2.846992, 2.846737, 2.846486,
        2.846238, 2.845993, 2.845751, 2.845511, 2.845275, 2.845042, 2.844812, 2.844584,
        2.844359, 2.844137, 2.843917, 2.843700, 2.843486, 2.843274, 2.843064, 2.842857,
        2.842652, 2.842450, 2.842250, 2.842052, 2.841856, 2.841663, 2.841471, 2.841282,
        2.841095, 2.840910, 2.840726, 2.840545, 2.840366, 2.840189, 2.840013, 2.839840,
        2.839668, 2.839498, 2.839329, 2.839163, 2.838998, 2.838835, 2.838674, 2.838514,
    ),
}

# standard normal quantiles for df > 200
NORMAL = {0.95: 1.644854, 0.99: 2.326348, 0.9975: 2.807034}
