import { bootstrap } from "./app.js";

window.addEventListener("load", bootstrap);
