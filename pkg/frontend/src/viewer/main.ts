/** Browser entry point: toolbar wiring around BrushApp. */

import { RepairClient } from "../api/client.js";
import { BrushApp } from "./app.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

async function boot(): Promise<void> {
  const statusBar = el<HTMLDivElement>("status");
  const app = new BrushApp(
    el<HTMLDivElement>("panels"),
    new RepairClient(el<HTMLInputElement>("service-url").value),
    (msg) => {
      statusBar.textContent = msg;
    },
  );

  el<HTMLSelectElement>("mode").addEventListener("change", (e) => {
    app.brush.mode = (e.target as HTMLSelectElement).value as "ring2d" | "sphere3d";
  });
  el<HTMLInputElement>("rings").addEventListener("change", (e) => {
    app.brush.rings = Number((e.target as HTMLInputElement).value);
  });
  el<HTMLInputElement>("radius").addEventListener("change", (e) => {
    app.brush.radius = Number((e.target as HTMLInputElement).value);
  });
  el<HTMLInputElement>("context-width").addEventListener("change", (e) => {
    app.brush.contextWidth = Number((e.target as HTMLInputElement).value);
  });
  el<HTMLInputElement>("backface").addEventListener("change", (e) => {
    app.brush.backfaceTest = (e.target as HTMLInputElement).checked;
  });
  el<HTMLButtonElement>("clear").addEventListener("click", () => app.clearSelection());
  el<HTMLButtonElement>("submit").addEventListener("click", () => {
    void app.submitRepair(el<HTMLSelectElement>("generator").value);
  });

  el<HTMLInputElement>("mesh-file").addEventListener("change", async (e) => {
    const files = (e.target as HTMLInputElement).files;
    if (!files || files.length < 2) {
      statusBar.textContent = "select the low-poly mesh and the reference mesh";
      return;
    }
    const [lp, ref] = [await files[0].text(), await files[1].text()];
    await app.load(lp, ref);
  });
}

void boot();
