// Built with: wasm-pack build crates/web --target web --out-dir www/pkg
import init, { responseCurve, synthAndFilter, paramTable } from "./pkg/eeg_lstm_web.js";

const $ = (id) => document.getElementById(id);
const colors = { theta: "#1b6ca8", alpha: "#d1495b", beta: "#2a9d8f" };

function plot(canvas, series, { xMax, yMin, yMax, guides = [] }) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  ctx.clearRect(0, 0, w, h);
  const sx = (x) => (x / xMax) * (w - 40) + 30;
  const sy = (y) => h - 20 - ((y - yMin) / (yMax - yMin)) * (h - 30);
  ctx.strokeStyle = "#ccc";
  ctx.setLineDash([4, 4]);
  for (const g of guides) {
    ctx.beginPath();
    ctx.moveTo(sx(0), sy(g));
    ctx.lineTo(sx(xMax), sy(g));
    ctx.stroke();
  }
  ctx.setLineDash([]);
  for (const { xs, ys, color } of series) {
    ctx.strokeStyle = color;
    ctx.beginPath();
    ys.forEach((y, i) => (i ? ctx.lineTo(sx(xs[i]), sy(y)) : ctx.moveTo(sx(xs[i]), sy(y))));
    ctx.stroke();
  }
  ctx.fillStyle = "#555";
  ctx.fillText("0", sx(0) - 4, h - 5);
  ctx.fillText(String(Math.round(xMax)), sx(xMax) - 20, h - 5);
}

function drawResponse() {
  const order = Number($("order").value);
  const fs = Number($("fs").value);
  const n = 400;
  const xs = Array.from({ length: n }, (_, i) => ((fs / 2) * i) / (n - 1));
  const series = ["theta", "alpha", "beta"].map((b) => ({
    xs,
    ys: Array.from(responseCurve(b, order, fs, n)),
    color: colors[b],
  }));
  plot($("response"), series, { xMax: fs / 2, yMin: 0, yMax: 1.05, guides: [Math.SQRT1_2, 1] });
}

function drawSignal() {
  const fs = Number($("fs").value);
  const samples = Math.round(1.5 * fs);
  const band = $("band").value;
  const out = synthAndFilter(Number($("seed").value), Number($("freq").value), Number($("amp").value),
    Number($("noise").value), samples, fs, band, Number($("order").value));
  const raw = Array.from(out.subarray(0, samples));
  const filt = Array.from(out.subarray(samples));
  const xs = raw.map((_, i) => i / fs);
  const lim = Math.max(...raw.map(Math.abs), 1e-9);
  plot($("signal"), [
    { xs, ys: raw, color: "#aaa" },
    { xs, ys: filt, color: colors[band] },
  ], { xMax: samples / fs, yMin: -lim, yMax: lim, guides: [0] });
}

function drawParams() {
  const sizes = $("sizes").value.split(",").map((s) => Number(s.trim())).filter((n) => n > 0);
  const { layers, total } = JSON.parse(paramTable(Uint32Array.from(sizes), Number($("dense").value), Number($("channels").value)));
  const rows = layers.map(([name, n]) => `<tr><th>${name}</th><td>${n.toLocaleString()}</td></tr>`);
  rows.push(`<tr><th>total</th><td><b>${total.toLocaleString()}</b></td></tr>`);
  $("params").innerHTML = rows.join("");
}

function guarded(fn) {
  return () => {
    try {
      fn();
      $("error").textContent = "";
    } catch (e) {
      $("error").textContent = String(e.message ?? e);
    }
  };
}

await init();
const redraw = guarded(() => { drawResponse(); drawSignal(); });
for (const id of ["order", "fs", "freq", "amp", "noise", "band", "seed"]) $(id).addEventListener("input", redraw);
for (const id of ["sizes", "dense", "channels"]) $(id).addEventListener("input", guarded(drawParams));
redraw();
guarded(drawParams)();
