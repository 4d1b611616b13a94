import init, { analyze, kl_heatmap, monte_carlo, presets } from "./pkg/lvs_web.js";

const $ = (id) => document.getElementById(id);
let presetList = [];
let claimed = [50, 5];
let last = null;

function params() {
  const stations = $("stations").value
    .split("\n")
    .map((l) => l.trim())
    .filter((l) => l)
    .map((l) => l.split(",").map(Number));
  return JSON.stringify({
    stations,
    claimed,
    sigma_db: Number($("sigma").value),
    correlation_distance: Number($("dc").value),
    min_distance: Number($("r").value),
    mode: $("mode").value,
  });
}

function loadPreset(i) {
  const p = presetList[i];
  $("stations").value = p.stations.map((s) => `${s[0]}, ${s[1]}`).join("\n");
  $("sigma").value = p.sigma_db;
  $("dc").value = p.correlation_distance;
  $("r").value = p.min_distance;
  $("mode").value = p.mode;
  claimed = p.claimed;
}

function drawRoc(a) {
  const c = $("roc").getContext("2d");
  const w = c.canvas.width, h = c.canvas.height, m = 40;
  const sx = (x) => m + x * (w - 2 * m), sy = (y) => h - m - y * (h - 2 * m);
  c.clearRect(0, 0, w, h);
  c.strokeStyle = "#999";
  c.strokeRect(m, m, w - 2 * m, h - 2 * m);
  c.setLineDash([4, 4]);
  c.beginPath(); c.moveTo(sx(0), sy(0)); c.lineTo(sx(1), sy(1)); c.stroke();
  c.setLineDash([]);
  c.strokeStyle = "#1f5fbf";
  c.lineWidth = 2;
  c.beginPath();
  c.moveTo(sx(1), sy(1));
  a.alpha.forEach((al, i) => c.lineTo(sx(al), sy(a.beta[i])));
  c.lineTo(sx(0), sy(0));
  c.stroke();
  c.lineWidth = 1;
  c.fillStyle = "#222";
  c.fillText("false positive rate α", w / 2 - 50, h - 10);
  c.save(); c.translate(12, h / 2 + 40); c.rotate(-Math.PI / 2); c.fillText("detection rate β", 0, 0); c.restore();
  c.fillText(`AUC ${a.auc.toFixed(4)}`, sx(0.6), sy(0.1));
}

function color(t) {
  const r = Math.round(255 * Math.min(1, 2 * t));
  const g = Math.round(255 * Math.min(1, 2 - 2 * t) * 0.85);
  return `rgb(${r},${g},80)`;
}

function drawHeat(hm, a) {
  const c = $("heat").getContext("2d");
  const w = c.canvas.width, h = c.canvas.height;
  c.clearRect(0, 0, w, h);
  const [x0, y0] = hm.min, [x1, y1] = hm.max;
  const sx = (x) => ((x - x0) / (x1 - x0)) * w, sy = (y) => h - ((y - y0) / (y1 - y0)) * h;
  const logs = hm.values.filter((v) => v !== null && v > 0).map(Math.log);
  const lo = Math.min(...logs), hi = Math.max(...logs);
  const cw = w / (hm.nx - 1), ch = h / (hm.ny - 1);
  hm.values.forEach((v, k) => {
    if (v === null) return;
    const i = k % hm.nx, j = Math.floor(k / hm.nx);
    const t = v > 0 ? (Math.log(v) - lo) / (hi - lo || 1) : 0;
    c.fillStyle = color(t);
    c.fillRect(i * cw - cw / 2, h - j * ch - ch / 2, cw + 1, ch + 1);
  });
  c.strokeStyle = "#000";
  c.beginPath();
  c.ellipse(sx(claimed[0]), sy(claimed[1]), Number($("r").value) * w / (x1 - x0),
    Number($("r").value) * h / (y1 - y0), 0, 0, 2 * Math.PI);
  c.stroke();
  const mark = (p, fill, size) => { c.fillStyle = fill; c.fillRect(sx(p[0]) - size / 2, sy(p[1]) - size / 2, size, size); };
  JSON.parse(params()).stations.forEach((s) => mark(s, "#000", 7));
  mark(claimed, "#fff", 7);
  mark(a.true_location, "#1f5fbf", 9);
}

function update() {
  for (const id of ["sigma", "dc", "r"]) document.querySelector(`output[for=${id}]`).textContent = $(id).value;
  try {
    const p = params();
    last = JSON.parse(analyze(p));
    drawRoc(last);
    drawHeat(JSON.parse(kl_heatmap(p, 161, 81)), last);
    const [x, y] = last.true_location;
    $("summary").textContent =
      `Optimal true location (${x.toFixed(1)}, ${y.toFixed(1)}), boost ${last.power_boost_db.toFixed(2)} dB, ` +
      `KL ${last.kl.toFixed(4)} nats.`;
    $("error").textContent = "";
  } catch (e) {
    $("error").textContent = String(e.message ?? e);
  }
}

function runMc() {
  try {
    const r = JSON.parse(monte_carlo(params(), Number($("trials").value), BigInt($("seed").value), Number($("lnl").value)));
    const row = (name, v, se, exact) =>
      `<tr><td>${name}</td><td>${v.toFixed(5)}</td><td>${se.toFixed(5)}</td><td>${exact.toFixed(5)}</td></tr>`;
    $("mcout").innerHTML =
      "<tr><th></th><th>empirical</th><th>stderr</th><th>analytic</th></tr>" +
      row("α", r.alpha, r.alpha_stderr, r.alpha_analytic) +
      row("β", r.beta, r.beta_stderr, r.beta_analytic);
    $("error").textContent = "";
  } catch (e) {
    $("error").textContent = String(e.message ?? e);
  }
}

await init();
presetList = JSON.parse(presets());
presetList.forEach((p, i) => $("preset").add(new Option(p.name, i)));
$("preset").addEventListener("change", (e) => { loadPreset(e.target.value); update(); });
for (const id of ["sigma", "dc", "r", "mode"]) $(id).addEventListener("input", update);
$("stations").addEventListener("change", update);
$("run").addEventListener("click", runMc);
loadPreset(0);
update();
