// Crane command panel: move/hoist targets, mode, homing, zeroing, magnet and
// fault injection. Motion controls disable while the crane is busy or not
// homed; gateway rejections (409/400) surface as an inline error.

import { ViewModel } from "../viewmodel";

function numberInput(id: string, value: string, step: string): HTMLInputElement {
  const input = document.createElement("input");
  input.type = "number";
  input.id = id;
  input.value = value;
  input.step = step;
  return input;
}

function button(id: string, label: string, onClick: () => void): HTMLButtonElement {
  const b = document.createElement("button");
  b.id = id;
  b.textContent = label;
  b.addEventListener("click", onClick);
  return b;
}

export function mountControlPanel(container: HTMLElement, vm: ViewModel): void {
  container.innerHTML = "";
  const title = document.createElement("h2");
  title.textContent = "Control";
  container.appendChild(title);

  const errorBox = document.createElement("div");
  errorBox.id = "control-error";
  errorBox.className = "inline-error";

  // cart move
  const moveRow = document.createElement("div");
  moveRow.className = "row";
  const moveX = numberInput("move-x", "0.5", "0.05");
  const moveMode = document.createElement("select");
  moveMode.id = "move-mode";
  for (const [value, label] of [["zv", "anti-sway (ZV)"], ["trap", "trapezoid"]]) {
    const opt = document.createElement("option");
    opt.value = value;
    opt.textContent = label;
    moveMode.appendChild(opt);
  }
  const moveBtn = button("btn-move", "Move", () => {
    void vm.command(() =>
      vm.api.move(parseFloat(moveX.value), moveMode.value as "zv" | "trap"));
  });
  moveRow.append("target x [m]", moveX, moveMode, moveBtn);

  // hoist
  const hoistRow = document.createElement("div");
  hoistRow.className = "row";
  const hoistL = numberInput("hoist-l", "0.5", "0.05");
  const hoistBtn = button("btn-hoist", "Hoist", () => {
    void vm.command(() => vm.api.hoist(parseFloat(hoistL.value)));
  });
  hoistRow.append("target l [m]", hoistL, hoistBtn);

  // homing / zeroing / magnet
  const utilRow = document.createElement("div");
  utilRow.className = "row";
  const homeBtn = button("btn-home", "Home", () => {
    void vm.command(() => vm.api.home());
  });
  const zeroBtn = button("btn-zero", "Zero encoder", () => {
    void vm.command(() => vm.api.zero());
  });
  const magnetBtn = button("btn-magnet", "Magnet: ?", () => {
    const on = vm.status?.state.magnet_on ?? false;
    void vm.command(() => vm.api.magnet(!on));
  });
  utilRow.append(homeBtn, zeroBtn, magnetBtn);

  // fault injection
  const faultRow = document.createElement("div");
  faultRow.className = "row";
  const damping = numberInput("fault-damping", "1.5", "0.1");
  const ropeOffset = numberInput("fault-rope", "0", "0.01");
  const encoderBias = numberInput("fault-bias", "0", "0.001");
  const injectBtn = button("btn-fault-inject", "Inject fault", () => {
    void vm.command(() =>
      vm.api.injectFault({
        damping_scale: parseFloat(damping.value),
        rope_length_offset: parseFloat(ropeOffset.value),
        encoder_bias_extra: parseFloat(encoderBias.value),
      }));
  });
  const clearBtn = button("btn-fault-clear", "Clear fault", () => {
    void vm.command(() => vm.api.clearFault());
  });
  faultRow.append("damping x", damping, "rope +m", ropeOffset,
    "bias +rad", encoderBias, injectBtn, clearBtn);

  container.append(moveRow, hoistRow, utilRow, faultRow, errorBox);

  vm.subscribe(() => {
    const status = vm.status;
    const busy = status?.busy ?? true;
    const homed = status?.homed ?? false;
    moveBtn.disabled = busy || !homed;
    hoistBtn.disabled = busy || !homed;
    homeBtn.disabled = busy;
    zeroBtn.disabled = busy;
    magnetBtn.textContent =
      `Magnet: ${status?.state.magnet_on ? "on" : "off"}`;
    errorBox.textContent = vm.lastError ?? "";
    errorBox.style.display = vm.lastError ? "block" : "none";
  });
}
