import init, { fishy_curve, tv_bound_curve, ar1_survival } from "./pkg/fishy_demo.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function frame(canvas, xs, ys, { logY = false } = {}) {
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height, pad = 60;
  ctx.clearRect(0, 0, w, h);
  const ty = logY ? (v) => Math.log10(Math.max(v, 1e-6)) : (v) => v;
  const finite = ys.map(ty).filter(Number.isFinite);
  let y0 = Math.min(...finite), y1 = Math.max(...finite);
  if (y0 === y1) { y0 -= 1; y1 += 1; }
  const x0 = Math.min(...xs), x1 = Math.max(...xs);
  const sx = (x) => pad + ((x - x0) / (x1 - x0 || 1)) * (w - 2 * pad);
  const sy = (y) => h - pad - ((ty(y) - y0) / (y1 - y0)) * (h - 2 * pad);
  ctx.strokeStyle = "#999";
  ctx.lineWidth = 2;
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#444";
  ctx.font = "22px system-ui";
  ctx.fillText(x0.toPrecision(3), pad, h - pad + 30);
  ctx.fillText(x1.toPrecision(3), w - pad - 50, h - pad + 30);
  const label = (v) => (logY ? "1e" + v.toFixed(1) : v.toPrecision(3));
  ctx.fillText(label(y1), 4, pad + 8);
  ctx.fillText(label(y0), 4, h - pad);
  return { ctx, sx, sy };
}

function line(ctx, sx, sy, xs, ys, color) {
  ctx.strokeStyle = color;
  ctx.lineWidth = 3;
  ctx.beginPath();
  xs.forEach((x, i) => (i ? ctx.lineTo(sx(x), sy(ys[i])) : ctx.moveTo(sx(x), sy(ys[i]))));
  ctx.stroke();
}

async function timed(status, f) {
  $(status).textContent = "running…";
  await new Promise((r) => setTimeout(r, 0));
  const t = performance.now();
  try {
    f();
    $(status).textContent = `done in ${((performance.now() - t) / 1000).toFixed(2)} s`;
  } catch (e) {
    $(status).textContent = `error: ${e.message ?? e}`;
  }
}

function runFishy() {
  const phi = num("f-phi");
  const rows = fishy_curve(phi, num("f-y"), -3, 3, 13, num("f-reps"), 1);
  const xs = [], mean = [], lo = [], hi = [], exact = [];
  for (let i = 0; i < rows.length; i += 4) {
    xs.push(rows[i]);
    mean.push(rows[i + 1]);
    lo.push(rows[i + 1] - 2 * rows[i + 2]);
    hi.push(rows[i + 1] + 2 * rows[i + 2]);
    exact.push(rows[i + 3]);
  }
  const { ctx, sx, sy } = frame($("f-plot"), xs, [...lo, ...hi, ...exact]);
  line(ctx, sx, sy, xs, exact, "#d62728");
  ctx.fillStyle = "#1f77b4";
  ctx.strokeStyle = "#1f77b4";
  xs.forEach((x, i) => {
    ctx.beginPath();
    ctx.moveTo(sx(x), sy(lo[i]));
    ctx.lineTo(sx(x), sy(hi[i]));
    ctx.stroke();
    ctx.beginPath();
    ctx.arc(sx(x), sy(mean[i]), 6, 0, 2 * Math.PI);
    ctx.fill();
  });
}

function runTv() {
  const b = tv_bound_curve($("t-model").value, num("t-phi"), num("t-lag"), num("t-reps"), num("t-tmax"), 1);
  const ts = Array.from(b, (_, i) => i);
  const { ctx, sx, sy } = frame($("t-plot"), ts, [...b, 0]);
  line(ctx, sx, sy, ts, Array.from(b), "#1f77b4");
}

function runSurvival() {
  const rows = ar1_survival(num("s-phi"), num("s-x0"), num("s-y0"), num("s-reps"), num("s-nmax"), 1);
  const ns = [], emp = [], bound = [];
  for (let i = 0; i < rows.length; i += 2) {
    ns.push(i / 2);
    emp.push(rows[i]);
    bound.push(rows[i + 1]);
  }
  const { ctx, sx, sy } = frame($("s-plot"), ns, [...emp.filter((v) => v > 0), ...bound], { logY: true });
  line(ctx, sx, sy, ns, bound, "#d62728");
  const last = emp.findIndex((v) => v === 0);
  const upto = last < 0 ? ns.length : last;
  line(ctx, sx, sy, ns.slice(0, upto), emp.slice(0, upto), "#1f77b4");
}

function mirror(slider) {
  const show = () => ($(slider + "-v").textContent = $(slider).value);
  $(slider).addEventListener("input", show);
  show();
}

await init();
mirror("f-phi");
mirror("s-phi");
$("f-run").onclick = () => timed("f-status", runFishy);
$("t-run").onclick = () => timed("t-status", runTv);
$("s-run").onclick = () => timed("s-status", runSurvival);
$("f-phi").addEventListener("change", () => timed("f-status", runFishy));
$("s-phi").addEventListener("change", () => timed("s-status", runSurvival));
timed("f-status", runFishy);
timed("s-status", runSurvival);
