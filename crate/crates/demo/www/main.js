import init, { BlobDemo } from "./pkg/mrnet_demo.js";

const COLORS = [[230, 85, 70], [60, 130, 220], [70, 170, 90], [200, 150, 40], [150, 90, 200], [90, 180, 190]];
const FIELD_RES = 120;
const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function drawField(canvas, demo, beta) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const field = demo.decision_field(FIELD_RES);
  const img = ctx.createImageData(FIELD_RES, FIELD_RES);
  field.forEach((c, i) => {
    const [r, g, b] = COLORS[c % COLORS.length];
    img.data.set([r, g, b, 70], 4 * i);
  });
  const off = new OffscreenCanvas(FIELD_RES, FIELD_RES);
  off.getContext("2d").putImageData(img, 0, 0);
  ctx.clearRect(0, 0, w, h);
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(off, 0, 0, w, h);

  const [x0, x1, y0, y1] = demo.bounds();
  const px = (x) => ((x - x0) / (x1 - x0)) * w;
  const py = (y) => ((y1 - y) / (y1 - y0)) * h;
  const pts = demo.points();
  const labels = demo.labels();
  const adv = beta > 0 ? demo.adversarial(beta) : pts;

  ctx.strokeStyle = "rgba(0,0,0,0.55)";
  ctx.lineWidth = 1;
  for (let i = 0; i < labels.length; i++) {
    const [ax, ay, bx, by] = [px(pts[2 * i]), py(pts[2 * i + 1]), px(adv[2 * i]), py(adv[2 * i + 1])];
    ctx.beginPath();
    ctx.moveTo(ax, ay);
    ctx.lineTo(bx, by);
    ctx.stroke();
    const ang = Math.atan2(by - ay, bx - ax);
    ctx.beginPath();
    ctx.moveTo(bx, by);
    ctx.lineTo(bx - 4 * Math.cos(ang - 0.5), by - 4 * Math.sin(ang - 0.5));
    ctx.moveTo(bx, by);
    ctx.lineTo(bx - 4 * Math.cos(ang + 0.5), by - 4 * Math.sin(ang + 0.5));
    ctx.stroke();
  }
  for (let i = 0; i < labels.length; i++) {
    const [r, g, b] = COLORS[labels[i] % COLORS.length];
    ctx.fillStyle = `rgb(${r},${g},${b})`;
    ctx.beginPath();
    ctx.arc(px(pts[2 * i]), py(pts[2 * i + 1]), 3, 0, 2 * Math.PI);
    ctx.fill();
    ctx.stroke();
  }
}

function drawHeatmap(canvas, values, n) {
  const ctx = canvas.getContext("2d");
  const max = values.reduce((m, v) => Math.max(m, v), 0) || 1;
  const img = ctx.createImageData(n, n);
  values.forEach((v, i) => {
    const t = Math.round(255 * (1 - v / max));
    img.data.set([t, t, 255 - Math.round(0.4 * (255 - t)), 255], 4 * i);
  });
  const off = new OffscreenCanvas(n, n);
  off.getContext("2d").putImageData(img, 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(off, 0, 0, canvas.width, canvas.height);
}

function drawHistogram(canvas, cal) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const edges = cal.edges();
  const counts = cal.counts();
  const top = Math.max(...counts, 1);
  const span = edges[edges.length - 1] || 1;
  const x = (v) => 30 + (v / span) * (w - 40);
  ctx.clearRect(0, 0, w, h);
  ctx.fillStyle = "#7a9cc6";
  counts.forEach((c, i) => {
    const bh = (c / top) * (h - 30);
    ctx.fillRect(x(edges[i]), h - 20 - bh, Math.max(1, x(edges[i + 1]) - x(edges[i]) - 1), bh);
  });
  ctx.strokeStyle = "#222";
  ctx.beginPath();
  ctx.moveTo(30, h - 20);
  ctx.lineTo(w - 10, h - 20);
  ctx.stroke();
  ctx.fillStyle = "#222";
  ctx.font = "11px sans-serif";
  ctx.fillText("0", 27, h - 6);
  ctx.fillText(span.toFixed(2), w - 40, h - 6);
  ctx.strokeStyle = "#c33";
  ctx.beginPath();
  ctx.moveTo(x(cal.recommended), 5);
  ctx.lineTo(x(cal.recommended), h - 20);
  ctx.stroke();
  ctx.fillStyle = "#c33";
  ctx.fillText("β", x(cal.recommended) + 3, 14);
}

function stats(demo, acc, beta) {
  const lines = [`train accuracy        ${(100 * acc).toFixed(1)}%`];
  if (beta > 0) {
    lines.push(`adversarial accuracy  ${(100 * demo.adversarial_accuracy(beta)).toFixed(1)}%`);
    lines.push(`embedding shift       ${demo.manifold_distance(beta).toFixed(4)}`);
  }
  lines.push(`Dunn index            ${demo.dunn().toFixed(4)}`);
  return lines.join("\n");
}

let current = null;

function dataset() {
  return [num("classes"), num("perClass"), num("separation"), num("dataSeed")];
}

function calibrate() {
  const probe = new BlobDemo(...dataset());
  current?.free();
  current = probe.calibrate(40, 0.5);
  drawHistogram($("hist"), current);
  $("histStats").textContent =
    `min intra-class distance ${current.global_min.toFixed(4)}\nrecommended β (0.5 × min) ${current.recommended.toFixed(4)}`;
  probe.free();
}

function trainBoth() {
  $("status").textContent = "";
  try {
    calibrate();
    const beta = num("beta");
    const epochs = num("epochs");
    const runs = [
      [0, $("fieldA"), $("statsA"), $("heatA")],
      [num("lambdaM"), $("fieldB"), $("statsB"), $("heatB")],
    ];
    for (const [lambdaM, field, text, heat] of runs) {
      const demo = new BlobDemo(...dataset());
      const acc = demo.train(lambdaM, beta, epochs, 0);
      drawField(field, demo, beta);
      text.textContent = stats(demo, acc, beta);
      drawHeatmap(heat, demo.distance_matrix(), demo.sorted_labels().length);
      demo.free();
    }
  } catch (e) {
    $("status").textContent = String(e);
  }
}

await init();
$("train").addEventListener("click", () => {
  $("status").textContent = "training...";
  setTimeout(trainBoth, 10);
});
$("useBeta").addEventListener("click", () => {
  if (current) {
    $("beta").value = current.recommended.toPrecision(3);
  }
});
trainBoth();
