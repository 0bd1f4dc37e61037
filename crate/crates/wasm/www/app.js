import init, { decompose, planted, simulate, default_config } from "./pkg/twingap_wasm.js";

const WINDOWS = ["NN", "PNN", "I", "CH"];
const EFFECTS = ["theta1_nd", "theta2_nd", "theta3_nd", "theta1_d", "theta2_d", "theta3_d"];
const NAMES = ["ND prenatal", "ND biology", "ND preferences", "D prenatal", "D biology", "D preferences"];
const COLORS = ["#8fb3d9", "#3c78b4", "#1b3f66", "#e6a27a", "#c2591f", "#6e2a08"];

const GAPS = {
  I: { theta_nd: 0.045, theta_tfe_nd: 0.027, theta_d: 0.027, theta_tfe_d: -0.010 },
  NN: { theta_nd: 0.036, theta_tfe_nd: 0.022, theta_d: 0.045, theta_tfe_d: 0.009 },
  PNN: { theta_nd: 0.018, theta_tfe_nd: 0.010, theta_d: -0.014, theta_tfe_d: -0.032 },
  CH: { theta_nd: 0.004, theta_tfe_nd: -0.008, theta_d: -0.016, theta_tfe_d: -0.031 },
};

const $ = (id) => document.getElementById(id);

// Grouped bars: one group per window, one bar per series value; `ghost`
// draws outlined bars (planted values) beside the filled ones.
function bars(canvas, groups, series, ghost) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  ctx.clearRect(0, 0, w, h);
  const all = series.flat().concat(ghost ? ghost.flat() : []).filter(Number.isFinite);
  const span = Math.max(0.01, ...all.map(Math.abs));
  const top = 20, bottom = h - 40, zero = (top + bottom) / 2;
  const y = (v) => zero - (v / span) * (bottom - top) / 2;
  const gw = (w - 60) / groups.length, bw = gw / (EFFECTS.length + 1);
  ctx.font = "11px system-ui";
  ctx.strokeStyle = "#999";
  ctx.beginPath(); ctx.moveTo(50, zero); ctx.lineTo(w, zero); ctx.stroke();
  ctx.fillStyle = "#555";
  ctx.fillText((span * 1000).toFixed(0) + "‰", 4, top + 4);
  ctx.fillText((-span * 1000).toFixed(0) + "‰", 4, bottom);
  groups.forEach((g, i) => {
    const x0 = 55 + i * gw;
    series[i].forEach((v, j) => {
      const x = x0 + j * bw;
      ctx.fillStyle = COLORS[j];
      ctx.fillRect(x, Math.min(y(v), zero), bw * 0.8, Math.abs(y(v) - zero));
      if (ghost) {
        ctx.strokeStyle = "#000";
        ctx.strokeRect(x, Math.min(y(ghost[i][j]), zero), bw * 0.8, Math.abs(y(ghost[i][j]) - zero));
      }
    });
    ctx.fillStyle = "#222";
    ctx.fillText(g, x0 + gw / 2 - 15, h - 22);
  });
  NAMES.forEach((n, j) => {
    ctx.fillStyle = COLORS[j];
    ctx.fillRect(55 + j * 130, h - 12, 10, 10);
    ctx.fillStyle = "#222";
    ctx.fillText(n, 70 + j * 130, h - 3);
  });
}

function show(el, text, isError) {
  el.textContent = text;
  el.className = isError ? "error" : "";
}

function runDecompose() {
  try {
    const text = $("gaps").value;
    show($("gaps-out"), decompose(text, "md", $("gaps-pk").checked));
    const table = JSON.parse(decompose(text, "json", false));
    bars($("gaps-chart"), table.periods.map((p) => p.window), table.periods.map((p) => EFFECTS.map((e) => p[e])));
  } catch (e) {
    show($("gaps-out"), String(e), true);
  }
}

const SLIDERS = {
  "pl-shift": (c, v) => (c.sex_shift = v),
  "pl-disc": (c, v) => (c.discrimination_effect.NN = v),
  "pl-pre": (c, v) => (c.prenatal_mortality_effect.NN = v),
  "pl-bio": (c, v) => (c.biology_effect.NN = v),
};

function runPlanted(base) {
  const cfg = structuredClone(base);
  for (const [id, set] of Object.entries(SLIDERS)) {
    const input = $(id);
    set(cfg, Number(input.value));
    input.nextElementSibling.textContent = Number(input.value).toFixed(3);
  }
  const cells = JSON.parse(planted(JSON.stringify(cfg))).cells;
  bars($("pl-chart"), WINDOWS, WINDOWS.map((w) => plantedRow(cells, w)));
}

function plantedRow(cells, w) {
  const nd = cells.find((c) => c.window === w && c.society === "ND");
  const d = cells.find((c) => c.window === w && c.society === "D");
  return [nd.theta1, nd.theta2, nd.theta3, d.theta1, d.theta2, d.theta3];
}

function runSimulate() {
  show($("sim-status"), "running…");
  // let the status paint before the synchronous run blocks the thread
  setTimeout(() => {
    try {
      const t0 = performance.now();
      const res = JSON.parse(simulate($("sim-cfg").value, Number($("sim-b").value)));
      const periods = res.estimated.periods;
      bars(
        $("sim-chart"),
        periods.map((p) => p.window),
        periods.map((p) => EFFECTS.map((e) => p[e])),
        periods.map((p) => plantedRow(res.planted.cells, p.window)),
      );
      show($("sim-out"), res.markdown + "\nOutlined bars: planted values.");
      show($("sim-status"), `${res.births} births, ${((performance.now() - t0) / 1000).toFixed(1)} s`);
    } catch (e) {
      show($("sim-status"), String(e), true);
    }
  }, 20);
}

await init();
const base = JSON.parse(default_config());
$("gaps").value = JSON.stringify(GAPS, null, 1);
$("sim-cfg").value = default_config();
$("pl-shift").value = base.sex_shift;
$("pl-disc").value = base.discrimination_effect.NN;
$("pl-pre").value = base.prenatal_mortality_effect.NN;
$("pl-bio").value = base.biology_effect.NN;
$("gaps-run").onclick = runDecompose;
$("sim-run").onclick = runSimulate;
for (const id of Object.keys(SLIDERS)) $(id).oninput = () => runPlanted(base);
runDecompose();
runPlanted(base);
